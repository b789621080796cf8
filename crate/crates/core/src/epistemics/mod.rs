//! Brute-force epistemic model checking over exhaustive run spaces.
//!
//! The checker works point-by-point: a point is a (run, time) pair, two
//! points are indistinguishable to an agent when its local states there are
//! equal (canonical serialization equality, restricted to same-time points
//! by synchrony), and the knowledge operators quantify over
//! indistinguishability in the usual way. Common knowledge among the
//! nonfailed group is a reachability fixpoint, computed as connected
//! components of the union of the live agents\' indistinguishability
//! relations.

mod checks;
mod eval;
mod space;

pub use checks::{
    check_ck_transfer, check_counting_decision_formula, check_flood_onset,
    check_information_order, check_kb_equivalence, check_sendwaste_theorem,
    check_vectorized_theorem, kb_first_decision, FormulaCheck, IdTable, InfoOrderCheck,
    KbEquivalence, KbMismatch, OnsetCheck,
};
pub use eval::{EpistemicsError, Formula};
pub use space::{Point, PointSpace};

pub(crate) use eval::EvalCache;
