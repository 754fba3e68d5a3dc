//! Admissible levels, the five closed-form families of simple modules, the
//! twist ψ and the involution Φ on labels, and the highest weights attached
//! to each label.

use std::fmt;
use std::str::FromStr;

use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cartan::{self, AffineWeight, Weight};
use crate::mode_algebra::h_poly_closed;
use crate::rat::{frac, q, qi, to_display, to_frac_string, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClassifierError {
    #[error("label ({0}, {1}, {2}) is outside the index range at this level")]
    OutOfRange(Form, i64, i64),
    #[error("level {0} is not principal or coprincipal admissible")]
    UnsupportedLevel(String),
    #[error("form {0} does not exist at a {1} level")]
    WrongClass(Form, &'static str),
    #[error("candidate weight {0} is not admissible")]
    NotAdmissible(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LevelClass {
    Principal { p: i64 },
    Coprincipal { p: i64 },
    OtherAdmissible { p: i64, q: i64 },
    NonAdmissible,
    Critical,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Level {
    pub k: Q,
    pub class: LevelClass,
}

impl Level {
    /// Numerator and denominator of k + 3 for the two supported classes.
    pub fn pq(&self) -> Result<(i64, i64), ClassifierError> {
        match self.class {
            LevelClass::Principal { p } => Ok((p, 3)),
            LevelClass::Coprincipal { p } => Ok((p, 4)),
            _ => Err(ClassifierError::UnsupportedLevel(to_display(&self.k))),
        }
    }

    pub fn p(&self) -> Result<i64, ClassifierError> {
        Ok(self.pq()?.0)
    }

    pub fn principal(p: i64) -> Level {
        classify_level(&(q(p, 3) - qi(3)))
    }

    pub fn coprincipal(p: i64) -> Level {
        classify_level(&(q(p, 4) - qi(3)))
    }

    pub fn is_principal(&self) -> bool {
        matches!(self.class, LevelClass::Principal { .. })
    }

    fn class_name(&self) -> &'static str {
        match self.class {
            LevelClass::Principal { .. } => "principal",
            LevelClass::Coprincipal { .. } => "coprincipal",
            _ => "non-supported",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.class {
            LevelClass::Principal { p } => format!("principal p={p}"),
            LevelClass::Coprincipal { p } => format!("coprincipal p={p}"),
            LevelClass::OtherAdmissible { p, q } => format!("admissible p={p} q={q}"),
            LevelClass::NonAdmissible => "non-admissible".into(),
            LevelClass::Critical => "critical".into(),
        };
        write!(f, "k={} ({})", to_display(&self.k), c)
    }
}

/// Admissibility of k = −3 + p/q for sp₄: p ≥ 3 when q is odd, p ≥ 4 when
/// q is even (lacing number 2 divides q).
pub fn classify_level(k: &Q) -> Level {
    let m = k + qi(cartan::DUAL_COXETER);
    let class = if m.is_zero() {
        LevelClass::Critical
    } else if !m.is_positive() {
        LevelClass::NonAdmissible
    } else {
        match (m.numer().to_i64(), m.denom().to_i64()) {
            (Some(p), Some(qq)) => {
                let ok = if qq.is_odd() { p >= cartan::DUAL_COXETER } else { p >= cartan::COXETER };
                match (ok, qq) {
                    (false, _) => LevelClass::NonAdmissible,
                    (true, 3) => LevelClass::Principal { p },
                    (true, 4) => LevelClass::Coprincipal { p },
                    (true, _) => LevelClass::OtherAdmissible { p, q: qq },
                }
            }
            _ => LevelClass::NonAdmissible,
        }
    };
    Level { k: k.clone(), class }
}

/// The family tag s of a label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Form {
    S1,
    S2,
    S3,
    S1p,
    S2p,
}

impl Form {
    pub fn is_principal(self) -> bool {
        matches!(self, Form::S1 | Form::S2 | Form::S3)
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Form::S1 => "1",
            Form::S2 => "2",
            Form::S3 => "3",
            Form::S1p => "1'",
            Form::S2p => "2'",
        };
        f.write_str(s)
    }
}

impl FromStr for Form {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "1" => Ok(Form::S1),
            "2" => Ok(Form::S2),
            "3" => Ok(Form::S3),
            "1'" | "1p" => Ok(Form::S1p),
            "2'" | "2p" => Ok(Form::S2p),
            o => Err(format!("unknown form {o:?}")),
        }
    }
}

impl Serialize for Form {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Form {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A simple module L^{(s)}_{i,j} with its J₀/L₀ data at a fixed level.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModuleLabel {
    pub s: Form,
    pub i: i64,
    pub j: i64,
    pub xi: Q,
    pub chi: Q,
    /// Top dimension of ψ²L.
    pub l: i64,
    pub top_dim: i64,
}

impl ModuleLabel {
    pub fn new(s: Form, i: i64, j: i64, level: &Level) -> Result<Self, ClassifierError> {
        let (xi, chi, l) = xi_chi(s, i, j, level)?;
        Ok(ModuleLabel { s, i, j, xi, chi, l, top_dim: i })
    }

    pub fn key(&self) -> (Form, i64, i64) {
        (self.s, self.i, self.j)
    }
}

impl fmt::Display for ModuleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L^({})_{{{},{}}} = L({}, {})", self.s, self.i, self.j, to_display(&self.xi), to_display(&self.chi))
    }
}

fn in_range(s: Form, i: i64, j: i64, p: i64) -> bool {
    if i < 1 || j < 1 {
        return false;
    }
    match s {
        Form::S1 | Form::S2 | Form::S3 => i <= p - 2 && j <= p - i - 1,
        Form::S1p => i <= p - 3 && 2 * j <= p - i - 1,
        Form::S2p => i <= p - 3 && j <= p - 2 * i - 1,
    }
}

/// (ξ, χ, l) of L^{(s)}_{i,j}.
pub fn xi_chi(s: Form, i: i64, j: i64, level: &Level) -> Result<(Q, Q, i64), ClassifierError> {
    let p = level.p()?;
    if s.is_principal() != level.is_principal() {
        return Err(ClassifierError::WrongClass(s, level.class_name()));
    }
    if !in_range(s, i, j, p) {
        return Err(ClassifierError::OutOfRange(s, i, j));
    }
    let k = &level.k;
    let (qi_, qj) = (qi(i), qi(j));
    let den = qi(4) * (k + qi(3));
    let xi1 = (qi(1) - &qi_) / qi(2);
    let chi1 = (qi(13) - qi(6) * &qi_ + &qi_ * &qi_ - qi(12) * &qj + qi(2) * &qi_ * &qj + qi(2) * &qj * &qj + qi(6) * k
        - qi(2) * &qi_ * k
        - qi(4) * &qj * k)
        / &den;
    let xi2 = (qi(7) - qi(2) * &qi_ - &qj + qi(2) * k) / qi(2);
    let chi2 = (qi(31) - qi(12) * &qi_ + qi(2) * &qi_ * &qi_ - qi(12) * &qj + qi(2) * &qi_ * &qj + &qj * &qj + qi(18) * k
        - qi(4) * &qi_ * k
        - qi(4) * &qj * k
        + qi(2) * k * k)
        / &den;
    let r = match s {
        Form::S1 => (xi1, chi1, p - i - j),
        Form::S2 => (xi2, chi2, i),
        Form::S3 => {
            let xi3 = (qi(4) - &qi_ - &qj + k) / qi(2);
            let chi3 = (qi(4) + &qi_ * &qi_ - qi(6) * &qj + &qj * &qj - qi(2) * &qj * k - k * k) / &den;
            (xi3, chi3, p - i - j)
        }
        Form::S1p => (xi1, chi1, p - i - 2 * j),
        Form::S2p => (xi2, chi2, i),
    };
    Ok(r)
}

/// Every simple module at a principal or coprincipal level, ordered by
/// form, then i, then j.
pub fn enumerate_modules(level: &Level) -> Result<Vec<ModuleLabel>, ClassifierError> {
    let p = level.p()?;
    let forms: &[Form] = if level.is_principal() { &[Form::S1, Form::S2, Form::S3] } else { &[Form::S1p, Form::S2p] };
    let mut out = Vec::new();
    for &s in forms {
        for i in 1..=p {
            for j in 1..=p {
                if in_range(s, i, j, p) {
                    out.push(ModuleLabel::new(s, i, j, level)?);
                }
            }
        }
    }
    Ok(out)
}

/// The successor of a label under the twist ψ.
pub fn psi_label(lab: &ModuleLabel, level: &Level) -> Result<ModuleLabel, ClassifierError> {
    let p = level.p()?;
    let (a, b) = (lab.i, lab.j);
    let (s, i, j) = match lab.s {
        Form::S1 => (Form::S3, b, p - a - b),
        Form::S3 => (Form::S2, b, p - a - b),
        Form::S2 => (Form::S1, b, a),
        Form::S1p => (Form::S2p, b, p - a - 2 * b),
        Form::S2p => (Form::S1p, b, a),
    };
    let image = ModuleLabel::new(s, i, j, level);
    assert!(image.is_ok(), "ψ left the label set at {lab}");
    image
}

/// (ξ, χ) ↦ (ξ + i − 1 − (2+k), χ − ξ − (i−1) + (2+k)/2) for a module with
/// top dimension i.
pub fn psi_eigenvalues(xi: &Q, chi: &Q, i: i64, k: &Q) -> (Q, Q) {
    let kk = k + qi(2);
    let xi2 = xi + qi(i - 1) - &kk;
    let chi2 = chi - xi - qi(i - 1) + &kk / qi(2);
    (xi2, chi2)
}

/// The image of a label under the component-group involution Φ.
pub fn phi_label(lab: &ModuleLabel, level: &Level) -> Result<ModuleLabel, ClassifierError> {
    let p = level.p()?;
    let (s, i, j) = match lab.s {
        Form::S1 | Form::S1p => (lab.s, lab.i, lab.j),
        Form::S2 => (Form::S3, lab.i, p - lab.i - lab.j),
        Form::S3 => (Form::S2, lab.i, p - lab.i - lab.j),
        Form::S2p => (Form::S2p, lab.i, p - 2 * lab.i - lab.j),
    };
    ModuleLabel::new(s, i, j, level)
}

/// Φ on eigenvalues: (ξ, χ) ↦ (−(ξ + i − 1), χ).
pub fn phi_eigenvalues(xi: &Q, chi: &Q, i: i64) -> (Q, Q) {
    (-(xi + qi(i - 1)), chi.clone())
}

/// ψ-orbits, each starting at its first label in enumeration order.
pub fn psi_orbits(level: &Level) -> Result<Vec<Vec<ModuleLabel>>, ClassifierError> {
    let labels = enumerate_modules(level)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for lab in &labels {
        if seen.contains(&lab.key()) {
            continue;
        }
        let mut orbit = vec![lab.clone()];
        seen.insert(lab.key());
        let mut cur = psi_label(lab, level)?;
        while cur.key() != lab.key() {
            seen.insert(cur.key());
            let next = psi_label(&cur, level)?;
            orbit.push(cur);
            cur = next;
        }
        out.push(orbit);
    }
    Ok(out)
}

/// The finite highest weight attached to a label: λ_{i,j} for s = 1, 1′ and
/// the selected candidates for s = 2, 3, 2′.
pub fn hw_weight(lab: &ModuleLabel, level: &Level) -> Result<Weight, ClassifierError> {
    let p = qi(level.p()?);
    let (i, j) = (qi(lab.i), qi(lab.j));
    let one = qi(1);
    let w = match lab.s {
        Form::S1 | Form::S1p => Weight::new(&j - &one, &i - &one),
        Form::S2 => Weight::new(-&i + &p / qi(3) - &one, qi(2) * &i + &j - qi(2) * &p / qi(3) - &one),
        Form::S3 => Weight::new(-&i + &p / qi(3) - &one, &i + &j - &p / qi(3) - &one),
        Form::S2p => Weight::new(-&i + &p / qi(4) - &one, qi(2) * &i + &j - &p / qi(2) - &one),
    };
    Ok(w)
}

/// [`hw_weight`], rejecting a candidate that is not admissible at the level.
pub fn admissible_hw_weight(lab: &ModuleLabel, level: &Level) -> Result<Weight, ClassifierError> {
    let w = hw_weight(lab, level)?;
    let hat = AffineWeight::at_level(w.clone(), level.k.clone());
    match cartan::is_admissible_weight(&hat) {
        Ok(true) => Ok(w),
        _ => Err(ClassifierError::NotAdmissible(format!("{w} for {lab}"))),
    }
}

/// (χ, ξ) of the reduction of L̂(λ): the L₀ and J₀ eigenvalues read off
/// from λ − (p/q)x₀.
pub fn conformal_dimension_and_charge(lam: &Weight, level: &Level) -> Result<(Q, Q), ClassifierError> {
    let (p, qq) = level.pq()?;
    let m = q(p, qq);
    let x0 = cartan::x0();
    let rho = cartan::rho();
    let mu = lam - &x0.scale(&m);
    let two_rho = rho.scale(&qi(2));
    let chi = cartan::inner_product(&mu, &(&mu + &two_rho)) / (qi(2) * &m) - &m / qi(2) * x0.norm2() + cartan::inner_product(&x0, &rho);
    let xi = -cartan::inner_product(&mu, &cartan::alpha2());
    Ok((chi, xi))
}

/// Both congruences of the weight system, for a candidate Λ.
pub fn satisfies_weight_system(lam: &Weight, lab: &ModuleLabel, level: &Level) -> bool {
    let m = &level.k + qi(3);
    let xi = -cartan::inner_product(lam, &cartan::alpha2());
    let two_rho = cartan::rho().scale(&qi(2));
    let chi = cartan::inner_product(lam, &(lam + &two_rho)) / (qi(2) * &m) - cartan::inner_product(lam, &cartan::x0());
    frac(&(xi - &lab.xi)).is_zero() && frac(&(chi - &lab.chi)).is_zero()
}

/// The rejected root Λ^{(2)−}_{i,j} of the weight system for s = 2.
pub fn rejected_s2_candidate(lab: &ModuleLabel, level: &Level) -> Result<Weight, ClassifierError> {
    let p = qi(level.p()?);
    let (i, j) = (qi(lab.i), qi(lab.j));
    let a = (qi(-6) - qi(6) * &i - qi(3) * &j + qi(4) * &p - (qi(3) * &j - qi(2) * &p)) / qi(6);
    let b = (qi(-3) + qi(6) * &i + qi(3) * &j - qi(2) * &p) / qi(3);
    Ok(Weight::new(a, b))
}

#[derive(Clone, Debug, Serialize)]
pub struct WeightSearch {
    pub label: (Form, i64, i64),
    pub printed: String,
    pub printed_admissible: bool,
    pub printed_solves_system: bool,
    /// Admissible solutions in the search box other than the printed one.
    pub extra_admissible: Vec<String>,
}

/// Scan Λ = aϖ₁ + bϖ₂ with a, b ∈ (1/q)Z, |a|, |b| ≤ radius, for
/// admissible solutions of the weight system.
pub fn search_weight_system(lab: &ModuleLabel, level: &Level, radius: i64) -> Result<WeightSearch, ClassifierError> {
    let (_, qq) = level.pq()?;
    let printed = hw_weight(lab, level)?;
    let adm = |w: &Weight| cartan::is_admissible_weight(&AffineWeight::at_level(w.clone(), level.k.clone())).unwrap_or(false);
    let mut extra = Vec::new();
    for a in -radius * qq..=radius * qq {
        for b in -radius * qq..=radius * qq {
            let w = Weight::new(q(a, qq), q(b, qq));
            if w == printed || !satisfies_weight_system(&w, lab, level) {
                continue;
            }
            if adm(&w) {
                extra.push(w.to_string());
            }
        }
    }
    Ok(WeightSearch {
        label: lab.key(),
        printed: printed.to_string(),
        printed_admissible: adm(&printed),
        printed_solves_system: satisfies_weight_system(&printed, lab, level),
        extra_admissible: extra,
    })
}

/// h_i(ξ,χ), h_j(ψ(ξ,χ)) and h_l(ψ²(ξ,χ)) for a label; all vanish.
pub fn h_system(lab: &ModuleLabel, k: &Q) -> [Q; 3] {
    h_system_rational(&qi(lab.i), &qi(lab.j), &qi(lab.l), &lab.xi, &lab.chi, k)
}

/// The same system with rational i, j, l (the families are rational in
/// i, j, k, so the identities hold off the integer lattice too).
pub fn h_system_rational(i: &Q, j: &Q, l: &Q, xi: &Q, chi: &Q, k: &Q) -> [Q; 3] {
    let kk = k + qi(2);
    let one = qi(1);
    let h0 = h_poly_closed(i, xi, chi, k);
    let xi1 = xi + (i - &one) - &kk;
    let chi1 = chi - xi - (i - &one) + &kk / qi(2);
    let h1 = h_poly_closed(j, &xi1, &chi1, k);
    let xi2 = xi + (i - &one) + (j - &one) - qi(2) * &kk;
    let chi2 = chi - qi(2) * xi - qi(2) * (i - &one) - (j - &one) + qi(2) * &kk;
    let h2 = h_poly_closed(l, &xi2, &chi2, k);
    [h0, h1, h2]
}

/// The closed forms with rational i, j and k, for the multipoint checks.
pub fn family_rational(s: Form, i: &Q, j: &Q, k: &Q) -> (Q, Q, Q) {
    let den = qi(4) * (k + qi(3));
    let xi1 = (qi(1) - i) / qi(2);
    let chi1 = (qi(13) - qi(6) * i + i * i - qi(12) * j + qi(2) * i * j + qi(2) * j * j + qi(6) * k - qi(2) * i * k - qi(4) * j * k) / &den;
    let xi2 = (qi(7) - qi(2) * i - j + qi(2) * k) / qi(2);
    let chi2 = (qi(31) - qi(12) * i + qi(2) * i * i - qi(12) * j + qi(2) * i * j + j * j + qi(18) * k - qi(4) * i * k - qi(4) * j * k
        + qi(2) * k * k)
        / &den;
    match s {
        Form::S1 => (xi1, chi1, qi(9) - i - j + qi(3) * k),
        Form::S2 | Form::S2p => (xi2, chi2, i.clone()),
        Form::S3 => {
            let xi3 = (qi(4) - i - j + k) / qi(2);
            let chi3 = (qi(4) + i * i - qi(6) * j + j * j - qi(2) * j * k - k * k) / &den;
            (xi3, chi3, qi(9) - i - j + qi(3) * k)
        }
        Form::S1p => (xi1, chi1, qi(12) - i - qi(2) * j + qi(4) * k),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRef {
    pub s: Form,
    pub i: i64,
    pub j: i64,
}

impl From<&ModuleLabel> for LabelRef {
    fn from(l: &ModuleLabel) -> Self {
        LabelRef { s: l.s, i: l.i, j: l.j }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleRow {
    pub s: Form,
    pub i: i64,
    pub j: i64,
    pub xi: String,
    pub chi: String,
    pub top_dim: i64,
    pub psi_image: LabelRef,
    pub phi_image: LabelRef,
}

/// The module table with ψ and Φ images, in enumeration order.
pub fn module_table(level: &Level) -> Result<Vec<ModuleRow>, ClassifierError> {
    let labels = enumerate_modules(level)?;
    labels
        .par_iter()
        .map(|lab| {
            Ok(ModuleRow {
                s: lab.s,
                i: lab.i,
                j: lab.j,
                xi: to_frac_string(&lab.xi),
                chi: to_frac_string(&lab.chi),
                top_dim: lab.top_dim,
                psi_image: LabelRef::from(&psi_label(lab, level)?),
                phi_image: LabelRef::from(&phi_label(lab, level)?),
            })
        })
        .collect()
}
