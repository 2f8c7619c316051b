//! The alpha-stable limit law W, 1 < alpha < 2, with characteristic function
//!
//! ```text
//! E exp(i t W) = exp{ -|t|^alpha Gamma(1 - alpha) (cos(pi alpha / 2) + i sin(pi alpha / 2) sgn t) }
//! ```
//!
//! Writing `B = Gamma(1 - alpha) cos(pi alpha / 2)` and
//! `C = Gamma(1 - alpha) sin(pi alpha / 2)`, the exponent is
//! `-B |t|^alpha - i C |t|^alpha sgn t`. Both factors of B are negative on
//! (1, 2) so B > 0, while C < 0. Matching against the usual totally skewed
//! form `exp{-gamma^alpha |t|^alpha (1 - i beta tan(pi alpha / 2) sgn t)}`
//! gives `gamma = B^(1/alpha)` and `beta = -1`. The skew is derived
//! numerically in [`StableParams::from_alpha`] and accepted only if both
//! forms of the characteristic function agree.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::distr::Open01;
use rand::Rng;

use crate::error::{Error, Result};
use crate::special::gamma;

/// Points at which the two characteristic-function forms are compared.
const MATCH_POINTS: [f64; 6] = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];

/// Largest tolerated modulus gap between the two forms.
pub const CF_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableParams {
    alpha: f64,
    b: f64,
    c: f64,
    scale: f64,
    skew: f64,
    cf_match_residual: f64,
}

/// Direct evaluation of the characteristic function from alpha, going
/// through Gamma(1 - alpha) and the complex exponential.
pub fn cf_from_alpha(alpha: f64, t: f64) -> Result<Complex64> {
    let g = gamma(1.0 - alpha)?;
    let phase = Complex64::new((PI * alpha / 2.0).cos(), (PI * alpha / 2.0).sin() * sign(t));
    Ok((-(t.abs().powf(alpha)) * g * phase).exp())
}

/// Characteristic function of the standard totally skewed form with scale
/// `gamma_scale` and skewness `beta`.
pub fn cf_standard_form(alpha: f64, gamma_scale: f64, beta: f64, t: f64) -> Complex64 {
    let z = Complex64::new(1.0, -beta * (PI * alpha / 2.0).tan() * sign(t));
    (-(gamma_scale * t.abs()).powf(alpha) * z).exp()
}

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl StableParams {
    /// Builds the parameters of W for `alpha` in the open interval (1, 2).
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::Domain(format!("stable index must lie in (1, 2), got {alpha}")));
        }
        let g = gamma(1.0 - alpha)?;
        let b = g * (PI * alpha / 2.0).cos();
        let c = g * (PI * alpha / 2.0).sin();
        if !(b > 0.0 && c < 0.0) {
            return Err(Error::Domain(format!("unexpected signs B={b}, C={c} at alpha={alpha}")));
        }
        let scale = b.powf(1.0 / alpha);
        // Imaginary parts: beta * B * tan(pi alpha / 2) = -C.
        let beta_raw = -c / (b * (PI * alpha / 2.0).tan());
        let skew = beta_raw.signum();

        let mut residual = 0.0f64;
        for t in MATCH_POINTS {
            let direct = cf_from_alpha(alpha, t)?;
            let standard = cf_standard_form(alpha, scale, skew, t);
            residual = residual.max((direct - standard).norm());
        }
        if residual > CF_MATCH_TOL {
            return Err(Error::Domain(format!("skew resolution failed at alpha={alpha}: CF residual {residual:e}")));
        }
        Ok(Self { alpha, b, c, scale, skew, cf_match_residual: residual })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Gamma(1 - alpha) cos(pi alpha / 2), positive.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Gamma(1 - alpha) sin(pi alpha / 2), negative.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// B^(1/alpha).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Skewness in the standard parametrization; always -1 here.
    pub fn skew(&self) -> f64 {
        self.skew
    }

    /// Worst gap between the two CF forms seen at construction.
    pub fn cf_match_residual(&self) -> f64 {
        self.cf_match_residual
    }

    /// `exp(-B|t|^a) * exp(-i C |t|^a sgn t)`.
    pub fn cf(&self, t: f64) -> Complex64 {
        let ta = t.abs().powf(self.alpha);
        let modulus = (-self.b * ta).exp();
        Complex64::from_polar(modulus, -self.c * ta * sign(t))
    }

    /// Real part of the CF, `exp(-B|t|^a) cos(C|t|^a)`.
    pub fn cf_real(&self, t: f64) -> f64 {
        let ta = t.abs().powf(self.alpha);
        (-self.b * ta).exp() * (self.c * ta).cos()
    }

    /// One exact draw of W by the Chambers–Mallows–Stuck construction.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let alpha = self.alpha;
        let zeta = self.skew * (PI * alpha / 2.0).tan();
        let shift = zeta.atan() / alpha;
        let factor = (1.0 + zeta * zeta).powf(1.0 / (2.0 * alpha));

        let u: f64 = rng.sample(Open01);
        let v = PI * (u - 0.5);
        let e = -rng.sample::<f64, _>(Open01).ln();

        let av = alpha * (v + shift);
        let x = factor * av.sin() / v.cos().powf(1.0 / alpha) * ((v - av).cos() / e).powf((1.0 - alpha) / alpha);
        self.scale * x
    }
}
