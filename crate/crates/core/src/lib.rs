//! Evidence for an alternative over a null hypothesis, in bits, from the
//! normalized maximum weighted likelihood (NMWL) of reduced statistics.
//!
//! Everything numerical is generic over [`scalar::Real`] (`f32` or `f64`);
//! the aliases at the crate root fix the scalar to `f64`, the precision at
//! which the documented tolerances hold. Weight rows are built in exact
//! rational arithmetic before conversion.
//!
//! ```
//! use nmwl::{Comparisons, EvidenceEngine, Family, Mode, Observation, Space, WeightScheme};
//!
//! let obs = Comparisons::new(vec![
//!     Observation::new("a", 2.8, Family::normal(1.0).unwrap()).unwrap(),
//!     Observation::new("b", 0.3, Family::normal(1.0).unwrap()).unwrap(),
//! ])
//! .unwrap();
//! let engine = EvidenceEngine::new(Default::default()).unwrap();
//! let alt = Space::Punctured { excluded: 0.0 };
//! let null = Space::Singleton { theta0: 0.0 };
//! let reports = engine.analyze(&obs, &WeightScheme::Null, &alt, &null, 0.0, Mode::Exact);
//! assert!(reports[0].as_ref().unwrap().di_bits > 0.0);
//! ```

// Coefficients keep their published digits; `!(x > y)` comparisons are
// there to reject NaN.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evidence;
pub mod families;
pub mod mcverify;
pub mod nmwl;
pub mod noncentral_t;
mod optimize;
pub mod quadrature;
pub mod scalar;
pub mod weights;
pub mod wlik;

pub use error::{Error, Result, Side};
pub use evidence::{grade, Grade};
pub use nmwl::{ApproxPolicy, Mode};

pub type Family = families::FamilyInstance<f64>;
pub type Observation = families::ReducedObservation<f64>;
pub type Comparisons = families::ComparisonSet<f64>;
pub type Weights = weights::WeightRow<f64>;
pub type Space = wlik::ParameterSpace<f64>;
pub type Report = evidence::EvidenceReport<f64>;
pub type EvidenceEngine = evidence::EvidenceEngine<f64>;
pub type WeightScheme = evidence::WeightScheme<f64>;
pub type Settings = nmwl::NmwlSettings<f64>;
pub type SimulationConfig = mcverify::SimulationConfig<f64>;
