//! ROUGE scores for generated intents and the summarization and motivator
//! report tables.

mod report;
mod rouge;

pub use report::{
    class_report, motivator_report, summarization_report, write_motivator_csv, write_summarization_csv, ClassCounts, MotivatorReport,
    MotivatorRow, SummarizationReport, SummaryRow, FAMILIES, TABLE3_HEADER, TABLE3_MODELS, TABLE5_HEADER,
};
pub use rouge::{lcs_len, rouge, rouge1, rouge_l, RougeScore};
