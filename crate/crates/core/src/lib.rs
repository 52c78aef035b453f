//! Template-based data-to-text generation distilled from a conditional
//! language model.
//!
//! The pipeline clusters inputs by field combination (or by the value of one
//! field), generates text for each input with a backend, delexicalizes it
//! into templates of terminal words and `[field]` slots, keeps the templates
//! that generalize best across their cluster, repairs ungeneralizable spans
//! with consensus beam search, and finally realizes new inputs only by
//! filling templates. Every output token therefore comes either from a
//! template or from the input.
//!
//! ```
//! use templm::model::{fill, Choice, DataInput, Template};
//!
//! let t = Template::parse("[name] is a [food] restaurant").unwrap();
//! let d = DataInput::from_pairs("ex", [("name", ["Aromi"]), ("food", ["Chinese"])]).unwrap();
//! assert_eq!(fill(&t, &d, &Choice::new()).unwrap().text(), "Aromi is a Chinese restaurant");
//! ```

pub mod config;
pub mod error;
pub mod evaluation;
pub mod extraction;
pub mod inference;
pub mod io;
pub mod lm;
pub mod model;
pub mod pipeline;
pub mod refinement;
pub mod template_set;
pub mod validation;

pub use error::{Error, Result};
pub use lm::{Context, LanguageModel, NGramConfig, NGramModel, RemoteModel, TokenDistribution};
pub use model::{
    cluster_key, fields_of, fill, Choice, ClusterKey, ClusterPolicy, DataInput, FilledOutput, Template, TemplateStatus,
    TemplateToken,
};
pub use template_set::TemplateSet;
