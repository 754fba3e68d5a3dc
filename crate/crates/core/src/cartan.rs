//! Root and weight data for C₂ = sp₄.
//!
//! Weights are stored in the fundamental-weight basis (ϖ₁, ϖ₂). The invariant
//! form is normalised so that long roots have square length 2:
//!
//! ```text
//! (ϖ_a | ϖ_b) = G[a][b],   G = [[1, 1/2], [1/2, 1/2]]
//! ```
//!
//! α₁ = 2ϖ₁ − 2ϖ₂ is long, α₂ = −ϖ₁ + 2ϖ₂ is short. Coroots are
//! identified with elements of h* through the form, α^∨ = 2α/|α|², so the
//! coroot lattice Q^∨ is spanned by α₁^∨ = α₁ and α₂^∨ = 2α₂.
//!
//! Affine weights carry a Λ₀ coefficient (the level, i.e. the value on K) and
//! a δ coefficient (the value on D). With (Λ₀|δ) = 1 and (Λ₀|Λ₀) = (δ|δ) = 0
//! this gives `(λ̂ | D) = delta` and `(λ̂ | K) = level`.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::rat::{q, qi, Q};

pub const DUAL_COXETER: i64 = 3;
pub const COXETER: i64 = 4;
pub const LACING: i64 = 2;
pub const DIM_G0: i64 = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CartanError {
    #[error("critical level k = -3 is not allowed")]
    CriticalLevel,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Weight {
    pub c: [Q; 2],
}

impl Weight {
    pub fn new(a: Q, b: Q) -> Self {
        Weight { c: [a, b] }
    }

    pub fn ints(a: i64, b: i64) -> Self {
        Weight::new(qi(a), qi(b))
    }

    pub fn zero() -> Self {
        Weight::ints(0, 0)
    }

    pub fn is_zero(&self) -> bool {
        self.c[0].is_zero() && self.c[1].is_zero()
    }

    pub fn scale(&self, s: &Q) -> Weight {
        Weight::new(&self.c[0] * s, &self.c[1] * s)
    }

    /// ⟨λ, α^∨⟩ = 2(λ|α)/|α|².
    pub fn coroot_pairing(&self, alpha: &Weight) -> Q {
        qi(2) * inner_product(self, alpha) / inner_product(alpha, alpha)
    }

    pub fn norm2(&self) -> Q {
        inner_product(self, self)
    }
}

impl Add for &Weight {
    type Output = Weight;
    fn add(self, o: &Weight) -> Weight {
        Weight::new(&self.c[0] + &o.c[0], &self.c[1] + &o.c[1])
    }
}

impl Sub for &Weight {
    type Output = Weight;
    fn sub(self, o: &Weight) -> Weight {
        Weight::new(&self.c[0] - &o.c[0], &self.c[1] - &o.c[1])
    }
}

impl Neg for &Weight {
    type Output = Weight;
    fn neg(self) -> Weight {
        Weight::new(-&self.c[0], -&self.c[1])
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})w1 + ({})w2", self.c[0], self.c[1])
    }
}

fn gram(a: usize, b: usize) -> Q {
    if a == 0 && b == 0 {
        qi(1)
    } else {
        q(1, 2)
    }
}

pub fn inner_product(a: &Weight, b: &Weight) -> Q {
    let mut s = Q::zero();
    for i in 0..2 {
        for j in 0..2 {
            if !a.c[i].is_zero() && !b.c[j].is_zero() {
                s += &a.c[i] * &b.c[j] * gram(i, j);
            }
        }
    }
    s
}

pub fn omega1() -> Weight {
    Weight::ints(1, 0)
}

pub fn omega2() -> Weight {
    Weight::ints(0, 1)
}

pub fn rho() -> Weight {
    Weight::ints(1, 1)
}

/// x₀ = h/2 for the subregular sl₂-triple; equals ϖ₁.
pub fn x0() -> Weight {
    omega1()
}

pub fn alpha1() -> Weight {
    Weight::ints(2, -2)
}

pub fn alpha2() -> Weight {
    Weight::ints(-1, 2)
}

/// η = α₁ + α₂.
pub fn eta() -> Weight {
    &alpha1() + &alpha2()
}

/// θ = α₁ + 2α₂, the highest root.
pub fn theta() -> Weight {
    &eta() + &alpha2()
}

pub fn coroot(alpha: &Weight) -> Weight {
    alpha.scale(&(qi(2) / alpha.norm2()))
}

/// a α₁^∨ + b α₂^∨.
pub fn coroot_lattice_point(a: i64, b: i64) -> Weight {
    &coroot(&alpha1()).scale(&qi(a)) + &coroot(&alpha2()).scale(&qi(b))
}

/// The fundamental coweights, as elements of h*.
pub fn fundamental_coweight(i: usize) -> Weight {
    match i {
        1 => Weight::ints(1, 0),
        2 => Weight::ints(0, 2),
        _ => panic!("C2 has two fundamental coweights"),
    }
}

pub fn positive_roots() -> Vec<Weight> {
    vec![alpha1(), alpha2(), eta(), theta()]
}

/// All eight roots, positive ones first.
pub fn roots() -> Vec<Weight> {
    let pos = positive_roots();
    let neg: Vec<Weight> = pos.iter().map(|a| -a).collect();
    pos.into_iter().chain(neg).collect()
}

pub fn is_positive_root(alpha: &Weight) -> bool {
    positive_roots().contains(alpha)
}

// ---------------------------------------------------------------------------
// Finite Weyl group

/// An element of W as an integer matrix acting on ϖ-coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FiniteWeylElement {
    pub m: [[i64; 2]; 2],
    pub sign: i64,
}

impl FiniteWeylElement {
    pub fn identity() -> Self {
        FiniteWeylElement { m: [[1, 0], [0, 1]], sign: 1 }
    }

    /// r_α(λ) = λ − ⟨λ, α^∨⟩ α for a simple root.
    pub fn simple_reflection(i: usize) -> Self {
        let m = match i {
            1 => [[-1, 0], [2, 1]],
            2 => [[1, 1], [0, -1]],
            _ => panic!("C2 has two simple reflections"),
        };
        FiniteWeylElement { m, sign: -1 }
    }

    pub fn apply(&self, w: &Weight) -> Weight {
        let r = |i: usize| &w.c[0] * qi(self.m[i][0]) + &w.c[1] * qi(self.m[i][1]);
        Weight::new(r(0), r(1))
    }

    pub fn compose(&self, o: &FiniteWeylElement) -> FiniteWeylElement {
        let mut m = [[0; 2]; 2];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = (0..2).map(|t| self.m[i][t] * o.m[t][j]).sum();
            }
        }
        FiniteWeylElement { m, sign: self.sign * o.sign }
    }

    pub fn inverse(&self) -> FiniteWeylElement {
        let det = self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0];
        let m = [
            [self.m[1][1] * det, -self.m[0][1] * det],
            [-self.m[1][0] * det, self.m[0][0] * det],
        ];
        FiniteWeylElement { m, sign: self.sign }
    }

    pub fn determinant(&self) -> i64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn is_identity(&self) -> bool {
        *self == FiniteWeylElement::identity()
    }
}

/// The eight elements of W, ordered by word length and then by matrix.
pub fn weyl_group() -> Vec<FiniteWeylElement> {
    let gens = [FiniteWeylElement::simple_reflection(1), FiniteWeylElement::simple_reflection(2)];
    let mut all = vec![FiniteWeylElement::identity()];
    let mut frontier = all.clone();
    while !frontier.is_empty() {
        let mut next: Vec<FiniteWeylElement> = Vec::new();
        for w in &frontier {
            for g in &gens {
                let x = g.compose(w);
                if !all.contains(&x) && !next.contains(&x) {
                    next.push(x);
                }
            }
        }
        next.sort();
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all
}

/// The longest element, −1 for C₂.
pub fn longest_element() -> FiniteWeylElement {
    FiniteWeylElement { m: [[-1, 0], [0, -1]], sign: 1 }
}

// ---------------------------------------------------------------------------
// Affine weights

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffineWeight {
    pub finite: Weight,
    pub level: Q,
    pub delta: Q,
}

impl AffineWeight {
    pub fn new(finite: Weight, level: Q, delta: Q) -> Self {
        AffineWeight { finite, level, delta }
    }

    /// λ + kΛ₀.
    pub fn at_level(finite: Weight, k: Q) -> Self {
        AffineWeight::new(finite, k, Q::zero())
    }

    /// (λ̂ | D): the δ coefficient.
    pub fn eval_d(&self) -> Q {
        self.delta.clone()
    }

    /// λ̂(K): the level.
    pub fn eval_k(&self) -> Q {
        self.level.clone()
    }
}

impl Add for &AffineWeight {
    type Output = AffineWeight;
    fn add(self, o: &AffineWeight) -> AffineWeight {
        AffineWeight::new(&self.finite + &o.finite, &self.level + &o.level, &self.delta + &o.delta)
    }
}

impl Sub for &AffineWeight {
    type Output = AffineWeight;
    fn sub(self, o: &AffineWeight) -> AffineWeight {
        AffineWeight::new(&self.finite - &o.finite, &self.level - &o.level, &self.delta - &o.delta)
    }
}

pub fn affine_inner_product(a: &AffineWeight, b: &AffineWeight) -> Q {
    inner_product(&a.finite, &b.finite) + &a.level * &b.delta + &a.delta * &b.level
}

/// ρ̂ = ρ + h^∨Λ₀.
pub fn rho_hat() -> AffineWeight {
    AffineWeight::at_level(rho(), qi(DUAL_COXETER))
}

/// t_α(λ) = λ + λ(K)α − [(α|λ) + |α|²/2 · λ(K)]δ.
pub fn translation(alpha: &Weight, lam: &AffineWeight) -> AffineWeight {
    let k = &lam.level;
    let finite = &lam.finite + &alpha.scale(k);
    let delta = &lam.delta - inner_product(alpha, &lam.finite) - alpha.norm2() * k / qi(2);
    AffineWeight::new(finite, k.clone(), delta)
}

/// The element w ∘ t_shift of the (extended) affine Weyl group.
///
/// For the integral Weyl group W ⋉ t_{qQ^∨} the shift is qη with η ∈ Q^∨;
/// [`AffineWeylElement::from_eta`] builds that case. Translations have sign
/// +1, so the sign is ε(w).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AffineWeylElement {
    pub w: FiniteWeylElement,
    pub shift: Weight,
}

impl AffineWeylElement {
    pub fn identity() -> Self {
        AffineWeylElement { w: FiniteWeylElement::identity(), shift: Weight::zero() }
    }

    pub fn new(w: FiniteWeylElement, shift: Weight) -> Self {
        AffineWeylElement { w, shift }
    }

    /// w t_{qη}, η given by its coordinates on α₁^∨, α₂^∨.
    pub fn from_eta(w: FiniteWeylElement, eta: (i64, i64), q_scale: i64) -> Self {
        let shift = coroot_lattice_point(eta.0, eta.1).scale(&qi(q_scale));
        AffineWeylElement { w, shift }
    }

    pub fn sign(&self) -> i64 {
        self.w.sign
    }

    pub fn apply(&self, lam: &AffineWeight) -> AffineWeight {
        let t = translation(&self.shift, lam);
        AffineWeight::new(self.w.apply(&t.finite), t.level, t.delta)
    }

    /// (w₁t_{b₁})(w₂t_{b₂}) = w₁w₂ t_{w₂⁻¹b₁ + b₂}.
    pub fn compose(&self, o: &AffineWeylElement) -> AffineWeylElement {
        let w = self.w.compose(&o.w);
        let shift = &o.w.inverse().apply(&self.shift) + &o.shift;
        AffineWeylElement { w, shift }
    }

    /// (w t_b)⁻¹ = w⁻¹ t_{−wb}.
    pub fn inverse(&self) -> AffineWeylElement {
        AffineWeylElement { w: self.w.inverse(), shift: -&self.w.apply(&self.shift) }
    }

    /// y g y⁻¹.
    pub fn conjugate_by(&self, y: &AffineWeylElement) -> AffineWeylElement {
        y.compose(self).compose(&y.inverse())
    }
}

/// w∘λ̂ = w(λ̂ + ρ̂) − ρ̂.
pub fn dot_action(g: &AffineWeylElement, lam: &AffineWeight) -> AffineWeight {
    let rh = rho_hat();
    &g.apply(&(lam + &rh)) - &rh
}

// ---------------------------------------------------------------------------
// Central charge

/// dim g₀ − 12/(k+3) · |ρ − (k+3)x₀|².
pub fn central_charge(k: &Q) -> Result<Q, CartanError> {
    let m = k + qi(DUAL_COXETER);
    if m.is_zero() {
        return Err(CartanError::CriticalLevel);
    }
    let v = &rho() - &x0().scale(&m);
    Ok(qi(DIM_G0) - qi(12) / &m * v.norm2())
}

/// The closed form −2(9 + 16k + 6k²)/(3 + k).
pub fn central_charge_closed(k: &Q) -> Result<Q, CartanError> {
    let m = k + qi(3);
    if m.is_zero() {
        return Err(CartanError::CriticalLevel);
    }
    Ok(qi(-2) * (qi(9) + qi(16) * k + qi(6) * k * k) / m)
}

// ---------------------------------------------------------------------------
// Integrality and admissibility

/// The real roots α + nδ over a fixed finite root α that are integral for
/// some λ̂: exactly those with n ≡ residue (mod period).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegralProgression {
    pub alpha: Weight,
    pub residue: i64,
    pub period: i64,
}

impl IntegralProgression {
    pub fn contains(&self, n: i64) -> bool {
        (n - self.residue).rem_euclid(self.period) == 0
    }

    /// Smallest n in the progression with α + nδ a positive root.
    pub fn first_positive(&self) -> i64 {
        let n_min = if is_positive_root(&self.alpha) { 0 } else { 1 };
        n_min + (self.residue - n_min).rem_euclid(self.period)
    }
}

/// ⟨λ̂, (α+nδ)^∨⟩ = 2((λ|α) + n·λ(K))/|α|².
pub fn affine_coroot_pairing(lam: &AffineWeight, alpha: &Weight, n: i64) -> Q {
    qi(2) * (inner_product(&lam.finite, alpha) + qi(n) * &lam.level) / alpha.norm2()
}

/// For each of the eight finite roots, the progression of n making α + nδ
/// integral for λ̂ (roots with no integral lift are omitted).
///
/// ⟨λ̂,(α+nδ)^∨⟩ = a + nb with b = 2k/|α|², so integrality is periodic in n
/// with period den(b) and one period decides everything.
pub fn integral_progressions(lam: &AffineWeight) -> Vec<IntegralProgression> {
    let mut out = Vec::new();
    for alpha in roots() {
        let b = qi(2) * &lam.level / alpha.norm2();
        let period: i64 = crate::rat::as_i64(&Q::from_integer(b.denom().clone())).expect("small denominator");
        for n in 0..period {
            if affine_coroot_pairing(lam, &alpha, n).is_integer() {
                out.push(IntegralProgression { alpha: alpha.clone(), residue: n, period });
                break;
            }
        }
    }
    out
}

fn spans_plane(ws: &[Weight]) -> bool {
    for a in ws {
        for b in ws {
            let det = &a.c[0] * &b.c[1] - &a.c[1] * &b.c[0];
            if !det.is_zero() {
                return true;
            }
        }
    }
    false
}

/// λ̂ is admissible iff ⟨λ̂+ρ̂, α^∨⟩ > 0 on every positive integral real
/// root and the integral roots span the real roots rationally.
///
/// Along a progression the pairing with λ̂+ρ̂ is affine in n with slope
/// 2(k+3)/|α|², so for k+3 > 0 only the first positive member matters.
pub fn is_admissible_weight(lam_hat: &AffineWeight) -> Result<bool, CartanError> {
    let m = &lam_hat.level + qi(DUAL_COXETER);
    if m.is_zero() {
        return Err(CartanError::CriticalLevel);
    }
    let progs = integral_progressions(lam_hat);
    let alphas: Vec<Weight> = progs.iter().map(|p| p.alpha.clone()).collect();
    if !spans_plane(&alphas) {
        return Ok(false);
    }
    if m.is_negative() {
        return Ok(false);
    }
    let shifted = lam_hat + &rho_hat();
    for p in &progs {
        let n = p.first_positive();
        if !affine_coroot_pairing(&shifted, &p.alpha, n).is_positive() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::q;

    #[test]
    fn root_lengths_and_pairings() {
        assert_eq!(alpha1().norm2(), qi(2));
        assert_eq!(alpha2().norm2(), qi(1));
        assert_eq!(inner_product(&alpha1(), &alpha2()), qi(-1));
        assert_eq!(theta().norm2(), qi(2));
        assert_eq!(eta().norm2(), qi(1));
        assert_eq!(inner_product(&omega1(), &omega1()), qi(1));
        assert_eq!(rho().norm2(), q(5, 2));
        assert_eq!(coroot(&alpha2()), Weight::ints(-2, 4));
        // ⟨ϖ_a, α_b^∨⟩ = δ_ab
        assert_eq!(omega1().coroot_pairing(&alpha1()), qi(1));
        assert_eq!(omega1().coroot_pairing(&alpha2()), qi(0));
        assert_eq!(omega2().coroot_pairing(&alpha2()), qi(1));
        for i in [1, 2] {
            let c = fundamental_coweight(i);
            assert_eq!(inner_product(&c, &alpha1()), qi((i == 1) as i64));
            assert_eq!(inner_product(&c, &alpha2()), qi((i == 2) as i64));
        }
    }

    #[test]
    fn weyl_group_has_eight_isometries() {
        let w = weyl_group();
        assert_eq!(w.len(), 8);
        let probes = [Weight::new(q(1, 3), q(-2, 5)), Weight::ints(2, 7), rho()];
        for g in &w {
            assert_eq!(g.sign, g.determinant());
            for a in &probes {
                for b in &probes {
                    assert_eq!(inner_product(&g.apply(a), &g.apply(b)), inner_product(a, b));
                }
            }
            for h in &w {
                assert!(w.contains(&g.compose(h)));
                assert_eq!(g.compose(h).sign, g.sign * h.sign);
            }
            assert!(g.compose(&g.inverse()).is_identity());
        }
        assert!(w.contains(&longest_element()));
    }

    #[test]
    fn roots_form_a_single_orbit_per_length() {
        let w = weyl_group();
        let mut long: Vec<Weight> = w.iter().map(|g| g.apply(&alpha1())).collect();
        long.sort();
        long.dedup();
        let mut short: Vec<Weight> = w.iter().map(|g| g.apply(&alpha2())).collect();
        short.sort();
        short.dedup();
        assert_eq!(long.len() + short.len(), 8);
        let mut all = roots();
        all.sort();
        let mut orbit: Vec<Weight> = long.into_iter().chain(short).collect();
        orbit.sort();
        assert_eq!(all, orbit);
    }

    #[test]
    fn central_charge_examples() {
        assert_eq!(central_charge(&q(-5, 3)).unwrap(), q(3, 2));
        assert_eq!(central_charge(&qi(0)).unwrap(), qi(-6));
        assert_eq!(central_charge(&qi(-3)), Err(CartanError::CriticalLevel));
        for k in [q(-7, 4), q(1, 2), q(-11, 3), qi(5), q(-29, 13)] {
            assert_eq!(central_charge(&k).unwrap(), central_charge_closed(&k).unwrap());
        }
    }

    #[test]
    fn translation_examples() {
        let lam = AffineWeight::new(Weight::new(q(1, 2), q(-3, 7)), q(-5, 3), q(2, 9));
        assert_eq!(translation(&Weight::zero(), &lam), lam);
        let l0 = AffineWeight::at_level(Weight::zero(), qi(1));
        let a = alpha1();
        assert_eq!(
            translation(&a, &l0),
            AffineWeight::new(a.clone(), qi(1), -a.norm2() / qi(2))
        );
        assert_eq!(translation(&a, &translation(&-&a, &lam)), lam);
    }

    #[test]
    fn affine_form_is_invariant() {
        let lam = AffineWeight::new(Weight::new(q(1, 2), q(-3, 7)), q(-5, 3), q(2, 9));
        let mu = AffineWeight::new(Weight::new(q(4, 5), q(1, 3)), q(1, 4), q(-1, 2));
        let g = AffineWeylElement::from_eta(FiniteWeylElement::simple_reflection(2), (1, -2), 3);
        assert_eq!(affine_inner_product(&g.apply(&lam), &g.apply(&mu)), affine_inner_product(&lam, &mu));
    }

    #[test]
    fn dot_action_fixes_walls() {
        let k = q(-5, 3);
        // ⟨λ̂+ρ̂, α₁^∨⟩ = 0 means the ϖ₁-coordinate of λ+ρ vanishes.
        let lam = AffineWeight::at_level(Weight::new(qi(-1), q(2, 3)), k);
        let r1 = AffineWeylElement::new(FiniteWeylElement::simple_reflection(1), Weight::zero());
        assert_eq!(dot_action(&r1, &lam), lam);
        assert_eq!(dot_action(&AffineWeylElement::identity(), &lam), lam);
    }

    #[test]
    fn admissibility_examples() {
        let k = q(-5, 3);
        assert!(is_admissible_weight(&AffineWeight::at_level(Weight::zero(), k.clone())).unwrap());
        let lam12 = Weight::ints(1, 0); // λ_{1,2} = ϖ₁
        assert!(is_admissible_weight(&AffineWeight::at_level(lam12, k.clone())).unwrap());
        assert_eq!(
            is_admissible_weight(&AffineWeight::at_level(Weight::zero(), qi(-3))),
            Err(CartanError::CriticalLevel)
        );
        // Outside the alcove: λ = 5ϖ₁ at p = 4 pairs to −3 with −θ + 3δ.
        let far = Weight::ints(5, 0);
        assert!(!is_admissible_weight(&AffineWeight::at_level(far, k.clone())).unwrap());
        // Negative shifted level.
        assert!(!is_admissible_weight(&AffineWeight::at_level(Weight::zero(), q(-10, 3))).unwrap());
        // Non-integral weight with too few integral roots.
        let generic = Weight::new(q(1, 7), q(2, 11));
        assert!(!is_admissible_weight(&AffineWeight::at_level(generic, k)).unwrap());
    }

    #[test]
    fn principal_progressions_have_period_three() {
        let lam = AffineWeight::at_level(Weight::zero(), q(-5, 3));
        let progs = integral_progressions(&lam);
        assert_eq!(progs.len(), 8);
        assert!(progs.iter().all(|p| p.period == 3 && p.residue == 0));
    }

    #[test]
    fn coprincipal_progressions() {
        let lam = AffineWeight::at_level(Weight::zero(), q(-7, 4));
        for p in integral_progressions(&lam) {
            let expect = if p.alpha.norm2() == qi(2) { 4 } else { 2 };
            assert_eq!(p.period, expect, "{}", p.alpha);
            assert_eq!(p.residue, 0);
        }
    }
}
