//! Run configuration: defaults, JSON file, then command-line overrides.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sigmalab::descriptor::Descriptor;
use sigmalab::fd::GridDomain;
use sigmalab::mesh::{generate_annulus, generate_disk, generate_rectangle};
use sigmalab::{Error, Mesh, Point2, Result};

pub const COMMANDS: [&str; 8] = [
    "mesh", "solve", "solve-nd", "map", "verify", "meyers", "beltrami", "unimodal",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    /// `disk:r,cx,cy`, `annulus:r_in,r_out,cx,cy` or `rect:x0,y0,x1,y1`.
    pub domain: Option<String>,
    pub h: Option<f64>,
    pub spacing: f64,
    pub sigma: String,
    /// Scalar data for solve-like commands, a map descriptor for map and verify.
    pub g: Option<String>,
    /// Reference used when `g` is `oracle`; derived from `sigma` when absent.
    pub oracle: Option<String>,
    /// `fem` or `fd` for the solve command.
    pub solver: String,
    pub alpha: f64,
    pub refinements: usize,
    pub margin: f64,
    pub directions: usize,
    pub tie_tolerance: f64,
    pub rel_tol: f64,
    pub probe_points: Option<Vec<[f64; 2]>>,
    pub probe_radius: Option<f64>,
    pub levels: usize,
    /// Explicit cyclic sequence for the unimodal command.
    pub values: Option<Vec<f64>>,
    pub seed: u64,
    pub svg: bool,
    pub out: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            domain: None,
            h: None,
            spacing: 0.02,
            sigma: "identity".into(),
            g: None,
            oracle: None,
            solver: "fem".into(),
            alpha: 2.0,
            refinements: 2,
            margin: 0.1,
            directions: 8,
            tie_tolerance: sigmalab::analysis::DEFAULT_TIE_TOLERANCE,
            rel_tol: 0.05,
            probe_points: None,
            probe_radius: None,
            levels: 16,
            values: None,
            seed: 0,
            svg: true,
            out: "out".into(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: format!("config: {e}"),
        })
    }

    pub fn command(&self) -> Result<&str> {
        let c = self.command.as_deref().ok_or_else(|| {
            Error::invalid("no command given (on the command line or in the config)")
        })?;
        if !COMMANDS.contains(&c) {
            return Err(Error::invalid(format!("unknown command '{c}'")));
        }
        Ok(c)
    }

    /// Fills command-dependent defaults and checks ranges.
    pub fn resolve(mut self) -> Result<Self> {
        let cmd = self.command()?.to_string();
        if self.domain.is_none() {
            self.domain = Some(
                if cmd == "meyers" {
                    "annulus:r_in=0.2,r_out=1"
                } else {
                    "disk:r=1"
                }
                .into(),
            );
        }
        if self.h.is_none() {
            self.h = Some(if cmd == "meyers" { 0.04 } else { 0.05 });
        }
        if cmd == "meyers" {
            self.sigma = format!("meyers:alpha={}", self.alpha);
            self.oracle = Some(format!("meyers:alpha={}", self.alpha));
            self.g = Some("oracle".into());
        }
        if self.g.is_none() {
            self.g = Some(
                if matches!(cmd.as_str(), "map" | "verify") {
                    "identity"
                } else {
                    "x1"
                }
                .into(),
            );
        }
        if self.sigma.starts_with("random-") && !self.sigma.contains("seed=") {
            let sep = if self.sigma.contains(':') { "," } else { ":" };
            self.sigma = format!("{}{sep}seed={}", self.sigma, self.seed);
        }
        if self.g.as_deref() == Some("oracle") && self.oracle.is_none() {
            let d = Descriptor::parse(&self.sigma)?;
            if d.name == "meyers" {
                self.oracle = Some(self.sigma.clone());
            } else if d.name == "identity" {
                self.oracle = Some("harmonic:re-z2".into());
            } else {
                return Err(Error::invalid(format!(
                    "g=oracle needs an oracle for sigma '{}'; set \"oracle\" in the config",
                    self.sigma
                )));
            }
        }
        let h = self.h.unwrap_or_default();
        if !(h > 0.0 && h.is_finite()) || !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::invalid("h and spacing must be positive"));
        }
        if !(self.margin >= 0.0) {
            return Err(Error::invalid("margin must be nonnegative"));
        }
        if self.directions == 0 || self.levels == 0 {
            return Err(Error::invalid("directions and levels must be positive"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::invalid("rel_tol must lie in (0, 1)"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be positive"));
        }
        if !matches!(self.solver.as_str(), "fem" | "fd") {
            return Err(Error::invalid(format!(
                "solver must be 'fem' or 'fd', got '{}'",
                self.solver
            )));
        }
        Domain::parse(self.domain.as_deref().unwrap_or_default())?;
        Ok(self)
    }

    pub fn h(&self) -> f64 {
        self.h.expect("resolved config has h")
    }

    pub fn g(&self) -> &str {
        self.g.as_deref().expect("resolved config has g")
    }

    pub fn domain(&self) -> Result<Domain> {
        Domain::parse(
            self.domain
                .as_deref()
                .expect("resolved config has a domain"),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Disk {
        center: Point2,
        r: f64,
    },
    Annulus {
        center: Point2,
        r_in: f64,
        r_out: f64,
    },
    Rect {
        min: Point2,
        max: Point2,
    },
}

impl Domain {
    pub fn parse(text: &str) -> Result<Domain> {
        let d = Descriptor::parse(text)?;
        let center = |d: &Descriptor| -> Result<Point2> {
            Ok(Point2::new(
                d.get("cx", Some(0.0))?,
                d.get("cy", Some(0.0))?,
            ))
        };
        let dom = match d.name.as_str() {
            "disk" => {
                d.only(&["r", "cx", "cy"])?;
                Domain::Disk {
                    center: center(&d)?,
                    r: d.get("r", Some(1.0))?,
                }
            }
            "annulus" => {
                d.only(&["r_in", "r_out", "cx", "cy"])?;
                Domain::Annulus {
                    center: center(&d)?,
                    r_in: d.get("r_in", Some(0.2))?,
                    r_out: d.get("r_out", Some(1.0))?,
                }
            }
            "rect" => {
                d.only(&["x0", "y0", "x1", "y1"])?;
                Domain::Rect {
                    min: Point2::new(d.get("x0", Some(-1.0))?, d.get("y0", Some(-1.0))?),
                    max: Point2::new(d.get("x1", Some(1.0))?, d.get("y1", Some(1.0))?),
                }
            }
            other => return Err(Error::invalid(format!("unknown domain '{other}'"))),
        };
        Ok(dom)
    }

    pub fn mesh(&self, h: f64) -> Result<Arc<Mesh>> {
        Ok(Arc::new(match *self {
            Domain::Disk { center, r } => generate_disk(center, r, h)?,
            Domain::Annulus {
                center,
                r_in,
                r_out,
            } => generate_annulus(center, r_in, r_out, h)?,
            Domain::Rect { min, max } => generate_rectangle(min, max, h)?,
        }))
    }

    pub fn grid(&self, spacing: f64) -> Result<Arc<GridDomain>> {
        Ok(Arc::new(match *self {
            Domain::Disk { center, r } => GridDomain::disk(center, r, spacing)?,
            Domain::Annulus {
                center,
                r_in,
                r_out,
            } => GridDomain::annulus(center, r_in, r_out, spacing)?,
            Domain::Rect { min, max } => GridDomain::rectangle(min, max, spacing)?,
        }))
    }
}
