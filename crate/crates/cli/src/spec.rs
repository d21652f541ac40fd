//! Density spec grammar:
//! `gaussian` | `scaled-gaussian:c=<v>` | `exp-power:p=<v>` | `q-exp:q=<v>,p=<v>`
//! | `phi:<file or phi spec>,p=<v>` | `table:<file>`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use isoprofile::phiexp::{phi_p_density, PhiFunction};
use isoprofile::radial::RadialDensity;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec {
    Gaussian,
    ScaledGaussian { c: f64 },
    ExpPower { p: f64 },
    QExp { q: f64, p: f64 },
    /// φ given as a `s,phi` CSV file or as a built-in phi spec (`identity`, `power:q=…`, `poly:…`).
    Phi { phi: String, p: f64 },
    Table { path: PathBuf },
}

fn positive(name: &str, raw: &str) -> Result<f64, CliError> {
    let v: f64 = raw.trim().parse().map_err(|_| CliError::spec(format!("{name}={raw} is not a number")))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(CliError::spec(format!("{name} must be a positive number, got {raw}")));
    }
    Ok(v)
}

fn keyed<'a>(s: &'a str, key: &str) -> Result<&'a str, CliError> {
    s.trim().strip_prefix(key).and_then(|r| r.strip_prefix('=')).ok_or_else(|| CliError::spec(format!("expected {key}=<v>, got \"{s}\"")))
}

impl FromStr for DensitySpec {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let s = s.trim();
        if s == "gaussian" {
            return Ok(DensitySpec::Gaussian);
        }
        let (kind, rest) = s.split_once(':').ok_or_else(|| CliError::spec(format!("unknown density \"{s}\"")))?;
        match kind {
            "scaled-gaussian" => Ok(DensitySpec::ScaledGaussian { c: positive("c", keyed(rest, "c")?)? }),
            "exp-power" => Ok(DensitySpec::ExpPower { p: positive("p", keyed(rest, "p")?)? }),
            "q-exp" => {
                let (q, p) = rest.split_once(',').ok_or_else(|| CliError::spec("q-exp needs q=<v>,p=<v>"))?;
                Ok(DensitySpec::QExp { q: positive("q", keyed(q, "q")?)?, p: positive("p", keyed(p, "p")?)? })
            }
            "phi" => {
                // the phi part may itself contain commas (poly coefficients)
                let (phi, p) = rest.rsplit_once(",p=").ok_or_else(|| CliError::spec("phi needs <file>,p=<v>"))?;
                if phi.is_empty() {
                    return Err(CliError::spec("phi needs a file or phi spec"));
                }
                Ok(DensitySpec::Phi { phi: phi.to_string(), p: positive("p", p)? })
            }
            "table" if !rest.is_empty() => Ok(DensitySpec::Table { path: PathBuf::from(rest) }),
            _ => Err(CliError::spec(format!("unknown density \"{s}\""))),
        }
    }
}

impl fmt::Display for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensitySpec::Gaussian => write!(f, "gaussian"),
            DensitySpec::ScaledGaussian { c } => write!(f, "scaled-gaussian:c={c}"),
            DensitySpec::ExpPower { p } => write!(f, "exp-power:p={p}"),
            DensitySpec::QExp { q, p } => write!(f, "q-exp:q={q},p={p}"),
            DensitySpec::Phi { phi, p } => write!(f, "phi:{phi},p={p}"),
            DensitySpec::Table { path } => write!(f, "table:{}", path.display()),
        }
    }
}

/// A phi given either as a file of `s,phi` rows or as a phi spec string.
pub fn parse_phi(raw: &str) -> Result<PhiFunction, CliError> {
    let path = Path::new(raw);
    if path.is_file() {
        return Ok(PhiFunction::from_csv(path)?);
    }
    Ok(raw.parse::<PhiFunction>()?)
}

impl DensitySpec {
    pub fn build(&self) -> Result<RadialDensity, CliError> {
        Ok(match self {
            DensitySpec::Gaussian => RadialDensity::gaussian(),
            DensitySpec::ScaledGaussian { c } => RadialDensity::scaled_gaussian(*c)?,
            DensitySpec::ExpPower { p } => RadialDensity::exp_power(*p)?,
            DensitySpec::QExp { q, p } => phi_p_density(&PhiFunction::power(*q)?, *p)?,
            DensitySpec::Phi { phi, p } => phi_p_density(&parse_phi(phi)?, *p)?,
            DensitySpec::Table { path } => {
                if !path.is_file() {
                    return Err(CliError::Io(format!("{}: no such file", path.display())));
                }
                RadialDensity::from_csv(path)?
            }
        })
    }
}
