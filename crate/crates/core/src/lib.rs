//! Bergman (Carleman) orthonormal polynomials for the interior of the
//! shifted-Zhukovsky level curve `L_1 = { w - 1 + 1/(w - 1) : |w| = R }`,
//! `R > 2`, computed in arbitrary precision, together with closed-form
//! asymptotic predictors and the machinery that compares the two.

pub mod asympt;
pub mod conformal;
pub mod error;
pub mod mp;
pub mod oracle;
pub mod quad;
pub mod special;
pub mod verify;

pub use conformal::{CurveParams, RegionLabel};
pub use error::{Error, Result};
pub use mp::MpComplex;
