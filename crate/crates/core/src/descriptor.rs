//! Short text descriptors for coefficients, boundary data, maps and oracles,
//! e.g. `aniso:l1=2,l2=0.5,theta=0.3` or `meyers-u1:alpha=2`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coefficients::{CoefficientField, SmoothParams};
use crate::error::{Error, Result};
use crate::mesh::Point2;
use crate::oracles::{holomorphic_oracle, meyers_solution, AnalyticSolution};

pub type BoundaryFn = Arc<dyn Fn(Point2) -> Result<f64> + Send + Sync>;

/// Name and `key=value` parameters of a descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub name: String,
    params: BTreeMap<String, f64>,
}

impl Descriptor {
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (name, rest) = match text.split_once(':') {
            Some((n, r)) => (n, r),
            None => (text, ""),
        };
        if name.is_empty() {
            return Err(Error::invalid(format!("empty descriptor '{text}'")));
        }
        let mut params = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                Error::invalid(format!("parameter '{item}' in '{text}' is not key=value"))
            })?;
            let v: f64 = v.trim().parse().map_err(|_| {
                Error::invalid(format!("parameter '{k}' in '{text}' is not a number"))
            })?;
            if !v.is_finite() {
                return Err(Error::invalid(format!(
                    "parameter '{k}' in '{text}' is not finite"
                )));
            }
            if params.insert(k.trim().to_string(), v).is_some() {
                return Err(Error::invalid(format!(
                    "parameter '{k}' repeated in '{text}'"
                )));
            }
        }
        Ok(Descriptor {
            name: name.to_string(),
            params,
        })
    }

    pub fn get(&self, key: &str, default: Option<f64>) -> Result<f64> {
        self.params.get(key).copied().or(default).ok_or_else(|| {
            Error::invalid(format!(
                "descriptor '{}' needs parameter '{key}'",
                self.name
            ))
        })
    }

    pub fn only(&self, keys: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(Error::invalid(format!(
                "unknown parameter '{k}' for '{}'",
                self.name
            ))),
            None => Ok(()),
        }
    }

    pub fn integer(&self, key: &str, default: Option<f64>) -> Result<u64> {
        let v = self.get(key, default)?;
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(Error::invalid(format!(
                "parameter '{key}' must be a nonnegative integer"
            )));
        }
        Ok(v as u64)
    }
}

fn smooth_params(d: &Descriptor) -> Result<SmoothParams> {
    let base = SmoothParams::default();
    let p = SmoothParams {
        eps: d.get("eps", Some(0.5))?,
        phi: d.get("phi", Some(base.phi))?,
        center: Point2::new(d.get("cx", Some(0.0))?, d.get("cy", Some(0.0))?),
        width: d.get("w", Some(base.width))?,
    };
    if !(p.width > 0.0) {
        return Err(Error::invalid("bump width must be positive"));
    }
    Ok(p)
}

/// Coefficient fields: `identity`, `aniso:l1,l2,theta`, `meyers:alpha`,
/// `smooth:eps,phi,cx,cy,w` (alias `smooth-holder`), `nonsym:tau,vary,eps,phi,cx,cy,w`,
/// `random-smooth:seed`, `random-nonsym:seed,tau`.
pub fn coefficient(text: &str) -> Result<CoefficientField> {
    let d = Descriptor::parse(text)?;
    match d.name.as_str() {
        "identity" => {
            d.only(&[])?;
            Ok(CoefficientField::identity())
        }
        "aniso" => {
            d.only(&["l1", "l2", "theta"])?;
            Ok(CoefficientField::anisotropic(
                d.get("l1", Some(1.0))?,
                d.get("l2", Some(1.0))?,
                d.get("theta", Some(0.0))?,
            ))
        }
        "meyers" => {
            d.only(&["alpha"])?;
            CoefficientField::meyers(d.get("alpha", None)?)
        }
        "smooth" | "smooth-holder" => {
            d.only(&["eps", "phi", "cx", "cy", "w"])?;
            Ok(CoefficientField::smooth(smooth_params(&d)?))
        }
        "nonsym" => {
            d.only(&["tau", "vary", "eps", "phi", "cx", "cy", "w"])?;
            Ok(CoefficientField::nonsymmetric(
                smooth_params(&d)?,
                d.get("tau", Some(0.2))?,
                d.get("vary", Some(0.0))?,
            ))
        }
        "random-smooth" => {
            d.only(&["seed"])?;
            let mut rng = ChaCha8Rng::seed_from_u64(d.integer("seed", Some(0.0))?);
            Ok(CoefficientField::random_smooth(&mut rng))
        }
        "random-nonsym" => {
            d.only(&["seed", "tau"])?;
            let tau = d.get("tau", Some(0.3))?;
            if !(tau > 0.0) {
                return Err(Error::invalid("tau must be positive"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(d.integer("seed", Some(0.0))?);
            Ok(CoefficientField::random_nonsymmetric(&mut rng, tau))
        }
        other => Err(Error::invalid(format!("unknown coefficient '{other}'"))),
    }
}

fn angle(p: Point2) -> Result<f64> {
    if p.norm() == 0.0 {
        return Err(Error::Evaluation {
            point: p,
            detail: "angle is undefined at the origin".into(),
        });
    }
    Ok(p.x2.atan2(p.x1))
}

fn from_oracle(oracle: AnalyticSolution, component: usize) -> BoundaryFn {
    Arc::new(move |p| oracle.component(component, p))
}

/// Scalar boundary data: `x1`, `x2`, `x1x2`, `re-z2`, `im-z2`, `cos-theta`,
/// `sin-theta`, `cos2-theta`, `meyers-u1:alpha`, `meyers-u2:alpha`,
/// `holo-re:m`, `holo-im:m`, `const:c`.
pub fn boundary_data(text: &str) -> Result<BoundaryFn> {
    let d = Descriptor::parse(text)?;
    let f: BoundaryFn = match d.name.as_str() {
        "x1" => Arc::new(|p| Ok(p.x1)),
        "x2" => Arc::new(|p| Ok(p.x2)),
        "x1x2" => Arc::new(|p| Ok(p.x1 * p.x2)),
        "re-z2" => Arc::new(|p| Ok(p.x1 * p.x1 - p.x2 * p.x2)),
        "im-z2" => Arc::new(|p| Ok(2.0 * p.x1 * p.x2)),
        "cos-theta" => Arc::new(|p| Ok(angle(p)?.cos())),
        "sin-theta" => Arc::new(|p| Ok(angle(p)?.sin())),
        "cos2-theta" => Arc::new(|p| Ok((2.0 * angle(p)?).cos())),
        "meyers-u1" | "meyers-u2" => {
            d.only(&["alpha"])?;
            let c = usize::from(d.name == "meyers-u2");
            return Ok(from_oracle(meyers_solution(d.get("alpha", None)?)?, c));
        }
        "holo-re" | "holo-im" => {
            d.only(&["m"])?;
            let c = usize::from(d.name == "holo-im");
            return Ok(from_oracle(
                holomorphic_oracle(d.integer("m", None)? as u32)?,
                c,
            ));
        }
        "const" => {
            d.only(&["c"])?;
            let c = d.get("c", None)?;
            return Ok(Arc::new(move |_| Ok(c)));
        }
        other => return Err(Error::invalid(format!("unknown boundary data '{other}'"))),
    };
    d.only(&[])?;
    Ok(f)
}

/// Two-component boundary maps: `identity`, `z2`, `meyers:alpha`, `holo:m`.
pub fn boundary_map(text: &str) -> Result<(BoundaryFn, BoundaryFn)> {
    let d = Descriptor::parse(text)?;
    match d.name.as_str() {
        "identity" => {
            d.only(&[])?;
            Ok((Arc::new(|p| Ok(p.x1)), Arc::new(|p| Ok(p.x2))))
        }
        "z2" => {
            d.only(&[])?;
            let o = holomorphic_oracle(2)?;
            Ok((from_oracle(o, 0), from_oracle(o, 1)))
        }
        "meyers" | "holo" => {
            let o = oracle(text)?
                .map()
                .expect("map oracles resolve to analytic maps");
            Ok((from_oracle(o, 0), from_oracle(o, 1)))
        }
        other => Err(Error::invalid(format!("unknown boundary map '{other}'"))),
    }
}

/// Closed-form references selectable by name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Oracle {
    Map(AnalyticSolution),
    /// `x1^2 - x2^2`, harmonic for the identity coefficient.
    HarmonicReZ2,
}

impl Oracle {
    pub fn map(&self) -> Option<AnalyticSolution> {
        match self {
            Oracle::Map(m) => Some(*m),
            Oracle::HarmonicReZ2 => None,
        }
    }

    /// Scalar value: the first component for maps.
    pub fn value(&self, p: Point2) -> Result<f64> {
        match self {
            Oracle::Map(m) => m.component(0, p),
            Oracle::HarmonicReZ2 => Ok(p.x1 * p.x1 - p.x2 * p.x2),
        }
    }

    pub fn gradient(&self, p: Point2) -> Result<[f64; 2]> {
        match self {
            Oracle::Map(m) => Ok(m.gradient(p)?[0]),
            Oracle::HarmonicReZ2 => Ok([2.0 * p.x1, -2.0 * p.x2]),
        }
    }
}

/// `meyers:alpha=..`, `holo:m=..`, `harmonic:re-z2`.
pub fn oracle(text: &str) -> Result<Oracle> {
    if text.trim() == "harmonic:re-z2" {
        return Ok(Oracle::HarmonicReZ2);
    }
    let d = Descriptor::parse(text)?;
    match d.name.as_str() {
        "meyers" => {
            d.only(&["alpha"])?;
            Ok(Oracle::Map(meyers_solution(d.get("alpha", None)?)?))
        }
        "holo" => {
            d.only(&["m"])?;
            Ok(Oracle::Map(holomorphic_oracle(
                d.integer("m", None)? as u32
            )?))
        }
        other => Err(Error::invalid(format!("unknown oracle '{other}'"))),
    }
}
