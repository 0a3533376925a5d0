//! Method names as accepted on the command line.

use core::fmt;
use core::str::FromStr;

use sania_core::PrecondKind;
use serde::{Serialize, Serializer};

/// Diagonal preconditioner choice of a method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precond {
    Identity,
    AdaGrad,
    Adam,
    AdaGradSqr,
    AdamSqr,
    Hutchinson,
}

impl Precond {
    pub const ALL: [Precond; 6] = [
        Precond::Identity,
        Precond::AdaGrad,
        Precond::Adam,
        Precond::AdaGradSqr,
        Precond::AdamSqr,
        Precond::Hutchinson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Precond::Identity => "identity",
            Precond::AdaGrad => "adagrad",
            Precond::Adam => "adam",
            Precond::AdaGradSqr => "adagrad-sqr",
            Precond::AdamSqr => "adam-sqr",
            Precond::Hutchinson => "hutchinson",
        }
    }

    pub fn kind(self) -> PrecondKind {
        match self {
            Precond::Identity => PrecondKind::Identity,
            Precond::AdaGrad => PrecondKind::AdaGrad,
            Precond::Adam => PrecondKind::Adam,
            Precond::AdaGradSqr => PrecondKind::AdaGradSqr,
            Precond::AdamSqr => PrecondKind::AdamSqr,
            Precond::Hutchinson => PrecondKind::Hutchinson,
        }
    }

    fn parse(s: &str) -> Option<Precond> {
        Precond::ALL.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Sgd,
    Sps,
    /// `w - γ B^{-1} m` with the given statistics (AdaGrad, Adam, ...).
    Preconditioned(Precond),
    Adadelta,
    Psps(Precond),
    /// Polyak step under the quadratic model in the `B` norm.
    SaniaQn(Precond),
    /// Exact Newton direction with the SANIA step-size (dense Hessian).
    SaniaNewton,
    /// Newton-CG with a diagonal CG preconditioner.
    SaniaPcg { precond: Precond, nonconvex: bool },
    CubicPolyak,
    GradRegNewton,
}

impl Method {
    /// Every accepted name, for help text and tests.
    pub fn all() -> Vec<Method> {
        let mut out = vec![Method::Sgd, Method::Sps, Method::Adadelta];
        for p in Precond::ALL {
            if p != Precond::Identity {
                out.push(Method::Preconditioned(p));
            }
            out.push(Method::Psps(p));
            if p != Precond::Identity {
                out.push(Method::SaniaQn(p));
            }
            out.push(Method::SaniaPcg { precond: p, nonconvex: false });
            out.push(Method::SaniaPcg { precond: p, nonconvex: true });
        }
        out.extend([Method::SaniaNewton, Method::CubicPolyak, Method::GradRegNewton]);
        out
    }

    /// Baselines driven by a fixed learning rate.
    pub fn takes_step_size(self) -> bool {
        matches!(self, Method::Sgd | Method::Preconditioned(_) | Method::Adadelta)
    }

    pub fn is_sania(self) -> bool {
        matches!(self, Method::SaniaQn(_) | Method::SaniaNewton | Method::SaniaPcg { .. })
    }

    /// Needs a Hessian (operator or dense) at each step.
    pub fn second_order(self) -> bool {
        matches!(
            self,
            Method::SaniaNewton | Method::SaniaPcg { .. } | Method::CubicPolyak | Method::GradRegNewton
        )
    }

    /// Needs a positive definite Hessian.
    pub fn requires_convex(self) -> bool {
        matches!(
            self,
            Method::SaniaNewton
                | Method::SaniaPcg { nonconvex: false, .. }
                | Method::CubicPolyak
                | Method::GradRegNewton
        )
    }

    pub fn precond(self) -> Option<Precond> {
        match self {
            Method::Preconditioned(p) | Method::Psps(p) | Method::SaniaQn(p) => Some(p),
            Method::SaniaPcg { precond, .. } => Some(precond),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Sgd => f.write_str("sgd"),
            Method::Sps => f.write_str("sps"),
            Method::Preconditioned(p) => f.write_str(p.name()),
            Method::Adadelta => f.write_str("adadelta"),
            Method::Psps(p) => write!(f, "psps-{}", p.name()),
            Method::SaniaQn(p) => write!(f, "sania-{}", p.name()),
            Method::SaniaNewton => f.write_str("sania-newton"),
            Method::SaniaPcg { precond, nonconvex } => {
                f.write_str("sania-pcg")?;
                if *nonconvex {
                    f.write_str("-nonconvex")?;
                }
                if *precond != Precond::Identity {
                    write!(f, "-{}", precond.name())?;
                }
                Ok(())
            }
            Method::CubicPolyak => f.write_str("cubic-polyak"),
            Method::GradRegNewton => f.write_str("grad-reg-newton"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown method `{0}`")]
pub struct UnknownMethod(pub String);

impl FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || UnknownMethod(s.to_string());
        let m = match s {
            "sgd" => Method::Sgd,
            "sps" => Method::Sps,
            "adadelta" => Method::Adadelta,
            "sania-newton" => Method::SaniaNewton,
            "cubic-polyak" => Method::CubicPolyak,
            "grad-reg-newton" => Method::GradRegNewton,
            _ => {
                if let Some(rest) = s.strip_prefix("sania-pcg") {
                    let (nonconvex, rest) = match rest.strip_prefix("-nonconvex") {
                        Some(r) => (true, r),
                        None => (false, rest),
                    };
                    let precond = match rest {
                        "" => Precond::Identity,
                        r => r.strip_prefix('-').and_then(Precond::parse).ok_or_else(unknown)?,
                    };
                    Method::SaniaPcg { precond, nonconvex }
                } else if let Some(p) = s.strip_prefix("psps-") {
                    Method::Psps(Precond::parse(p).ok_or_else(unknown)?)
                } else if let Some(p) = s.strip_prefix("sania-") {
                    match Precond::parse(p) {
                        Some(Precond::Identity) | None => return Err(unknown()),
                        Some(p) => Method::SaniaQn(p),
                    }
                } else {
                    match Precond::parse(s) {
                        Some(Precond::Identity) | None => return Err(unknown()),
                        Some(p) => Method::Preconditioned(p),
                    }
                }
            }
        };
        Ok(m)
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}
