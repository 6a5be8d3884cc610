//! Tabular data: CSV ingestion with type inference, feature roles, splitting,
//! one-hot encoding, normalization, balancing, correlation screening and PCA.

mod balance;
mod correlation;
mod csv_io;
mod encode;
mod normalize;
mod pca;
mod split;
mod table;

pub use balance::{apply_balancing, balance_report, BalanceReport, Binning, CategoryCount, FeatureBalance};
pub use correlation::{correlation_check, pearson, CorrelatedPair, CorrelationReport, DEFAULT_CORRELATION_THRESHOLD};
pub use csv_io::{from_raw, load_csv, load_csv_files, parse_csv, read_csv_str, RawCsv};
pub use encode::{encode, ColumnGroup, Encoded, EncodedMatrix, EncodingRecipe, GroupKind};
pub use normalize::{ColumnStats, NormMethod, NormalizationParams};
pub use pca::{pca_fit, Pca};
pub use split::{split_random, SplitFractions};
pub use table::{Column, DataTable, FeatureKind, FeatureSpec, Role, RoleHint, Source, Split, Task};
