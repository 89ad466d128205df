//! Machinery for certifying positive stable commutator length: free-group
//! word algebra, counting quasi-morphisms, quasi-tree geometry, group
//! actions with axes and projections, and a symbolic classifier for
//! decomposed elements.

pub mod acceptance;
pub mod actions;
pub mod classifier;
pub mod counting;
pub mod exact;
pub mod hypgraph;
pub mod words;

pub use actions::{Backend, ExplicitAction, Isometry, ProjectionFamily, QuasiAxis};
pub use classifier::{NtDecomposition, PureComponent, Verdict};
pub use counting::{QmReport, QuasiMorphism, RationalInterval, TreeCountingQm};
pub use hypgraph::{FiniteMetricGraph, Hyperbolicity, TreeQuotient};
pub use words::{ClSearch, CyclicWord, Letter, Word, WordError};
