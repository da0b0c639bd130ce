//! Evaluation: datasets, metrics, significance testing, BLEU and the n-sweep.

pub mod bleu;
pub mod dataset;
pub mod harness;
pub mod metrics;

pub use bleu::{bleu, corpus_bleu, mean_sentence_bleu, tokenize};
pub use dataset::{
    convert_bigbench, convert_climate, load_bigbench_lfd, load_climate, load_dataset, looks_formal, parse_records,
    read_records, write_records, Dataset, DatasetRecord,
};
pub use harness::{
    compare_reports, one_shot_example_index, run_method, sweep_csv, sweep_n, ItemRecord, Method, Report,
};
pub use metrics::{accuracy, macro_f1, paired_permutation_exact, paired_permutation_test};
