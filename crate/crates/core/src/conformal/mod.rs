//! Evaluable conformal maps with derivative access.
//!
//! Analytic kinds evaluate closed forms. Boundary-fitted maps are numerical
//! Riemann maps onto polygonal Jordan domains built by the geodesic zipper.

mod koch;
mod zipper;

pub use koch::{koch_snowflake, JordanCurve, CLASSICAL_FLATNESS};
pub use zipper::{build_boundary_map, ZipperMap};
pub(crate) use koch::segment_distance;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceDomain {
    Disk,
    HalfPlane,
}

/// A univalent map from the disk (or half plane) onto a target domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConformalMap {
    Identity {
        #[serde(default = "default_source")]
        source: SourceDomain,
    },
    /// Disk automorphism `e^{i rotation} (z - a) / (1 - conj(a) z)`.
    Mobius { a: Complex64, rotation: f64 },
    /// Koebe function `z / (1 - z)^2`, onto the plane minus `(-inf, -1/4]`.
    Koebe,
    /// Inverse radial slit map: the disk onto the disk minus a radial slit of
    /// logarithmic capacity `capacity` ending at `e^{i angle}`.
    Slit { angle: f64, capacity: f64 },
    /// `outer(inner(z))`.
    Composed { outer: Box<ConformalMap>, inner: Box<ConformalMap> },
    BoundaryFitted(Box<ZipperMap>),
}

fn default_source() -> SourceDomain {
    SourceDomain::Disk
}

/// Value and derivative at a point, with the near-boundary warning flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    pub deriv: Complex64,
    pub near_boundary: bool,
}

pub const NEAR_BOUNDARY: f64 = 1e-12;

impl ConformalMap {
    pub fn identity() -> Self {
        ConformalMap::Identity { source: SourceDomain::Disk }
    }

    pub fn mobius(a: Complex64, rotation: f64) -> Result<Self> {
        if !(a.norm() < 1.0) || !rotation.is_finite() {
            return Err(crate::error::param("a", "Mobius parameter must satisfy |a| < 1"));
        }
        Ok(ConformalMap::Mobius { a, rotation })
    }

    pub fn compose(outer: ConformalMap, inner: ConformalMap) -> Self {
        ConformalMap::Composed { outer: Box::new(outer), inner: Box::new(inner) }
    }

    pub fn source(&self) -> SourceDomain {
        match self {
            ConformalMap::Identity { source } => *source,
            ConformalMap::Composed { inner, .. } => inner.source(),
            _ => SourceDomain::Disk,
        }
    }

    /// Whether the image domain is bounded.
    pub fn is_bounded(&self) -> bool {
        match self {
            ConformalMap::Identity { source } => *source == SourceDomain::Disk,
            ConformalMap::Koebe => false,
            ConformalMap::Composed { outer, inner } => match **outer {
                ConformalMap::Koebe | ConformalMap::Identity { .. } => {
                    outer.is_bounded() && inner.is_bounded()
                }
                _ => outer.is_bounded(),
            },
            _ => true,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConformalMap::Identity { .. } => "identity",
            ConformalMap::Mobius { .. } => "mobius",
            ConformalMap::Koebe => "koebe",
            ConformalMap::Slit { .. } => "slit",
            ConformalMap::Composed { .. } => "composed",
            ConformalMap::BoundaryFitted(_) => "boundary-fitted",
        }
    }

    fn check_source(&self, z: Complex64) -> Result<bool> {
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::Domain { re: z.re, im: z.im });
        }
        match self.source() {
            SourceDomain::Disk => {
                let r = z.norm();
                if r > 1.0 {
                    Err(Error::Domain { re: z.re, im: z.im })
                } else {
                    Ok(r > 1.0 - NEAR_BOUNDARY)
                }
            }
            SourceDomain::HalfPlane => {
                if z.im < 0.0 {
                    Err(Error::Domain { re: z.re, im: z.im })
                } else {
                    Ok(z.im < NEAR_BOUNDARY)
                }
            }
        }
    }

    /// Value and derivative without domain checks.
    fn jet(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let one = Complex64::new(1.0, 0.0);
        Ok(match self {
            ConformalMap::Identity { .. } => (z, one),
            ConformalMap::Mobius { a, rotation } => {
                let rot = Complex64::from_polar(1.0, *rotation);
                let den = one - a.conj() * z;
                let value = rot * (z - a) / den;
                let deriv = rot * (one - a.norm_sqr()) / (den * den);
                (value, deriv)
            }
            ConformalMap::Koebe => {
                let q = one - z;
                if q.norm() < 1e-150 {
                    return Err(Error::Domain { re: z.re, im: z.im });
                }
                (z / (q * q), (one + z) / (q * q * q))
            }
            ConformalMap::Slit { angle, capacity } => (
                slit::radial_inverse(z, *angle, *capacity),
                slit::radial_inverse_deriv(z, *angle, *capacity),
            ),
            ConformalMap::Composed { outer, inner } => {
                let (w, dw) = inner.jet(z)?;
                let (v, dv) = outer.jet(w)?;
                (v, dv * dw)
            }
            ConformalMap::BoundaryFitted(zm) => zm.jet(z),
        })
    }

    pub fn eval_checked(&self, z: Complex64) -> Result<Evaluation> {
        let near_boundary = self.check_source(z)?;
        let (value, deriv) = self.jet(z)?;
        if !(value.re.is_finite() && value.im.is_finite() && deriv.re.is_finite() && deriv.im.is_finite()) {
            return Err(Error::Numeric(format!("non-finite map value at {z}")));
        }
        Ok(Evaluation { value, deriv, near_boundary })
    }

    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.eval_checked(z)?.value)
    }

    pub fn deriv(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.eval_checked(z)?.deriv)
    }
}
