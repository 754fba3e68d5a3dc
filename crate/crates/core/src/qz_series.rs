//! Truncated bivariate series in q and z with rational exponent offsets.
//!
//! A [`QZSeries`] stores coefficients of `q^{q_offset + n} z^{z_offset + m}`
//! for `0 ≤ n ≤ order` and `z_min ≤ m ≤ z_max`. Inside that rectangle the
//! coefficients are exact; outside it they are unknown. Coefficients below
//! `q_offset` are zero by convention, so the q-direction is a plain
//! truncation while the z-window is a promise made by whoever built the
//! series (see the window policy in `characters`).
//!
//! Storage is dense and row-major by q-degree.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rat::{as_i64, parse_q, qi, to_display, to_frac_string, Q};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QzError {
    #[error("exponent offsets differ by a non-integer ({0})")]
    NonAlignableOffsets(String),
    #[error("the factor (1 - q^0 z^0) has no inverse")]
    ZeroExponentFactor,
    #[error("malformed series: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QZSeries {
    q_offset: Q,
    z_offset: Q,
    order: usize,
    z_min: i64,
    z_max: i64,
    coeffs: Vec<Q>,
}

impl QZSeries {
    /// The zero series on `[0, order] × [z_min, z_max]`.
    pub fn zero(q_offset: Q, z_offset: Q, order: usize, window: (i64, i64)) -> Self {
        assert!(window.0 <= window.1, "empty z-window");
        let width = (window.1 - window.0 + 1) as usize;
        QZSeries {
            q_offset,
            z_offset,
            order,
            z_min: window.0,
            z_max: window.1,
            coeffs: vec![Q::zero(); (order + 1) * width],
        }
    }

    /// c · q^{q_exp} z^{z_exp}, with offsets placed at the monomial.
    pub fn monomial(c: Q, q_exp: Q, z_exp: Q, order: usize, window: (i64, i64)) -> Self {
        let mut s = QZSeries::zero(q_exp, z_exp, order, window);
        assert!(window.0 <= 0 && 0 <= window.1, "window must contain the monomial");
        s.set(0, 0, c);
        s
    }

    pub fn one(order: usize, window: (i64, i64)) -> Self {
        QZSeries::monomial(Q::one(), Q::zero(), Q::zero(), order, window)
    }

    pub fn q_offset(&self) -> &Q {
        &self.q_offset
    }

    pub fn z_offset(&self) -> &Q {
        &self.z_offset
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn window(&self) -> (i64, i64) {
        (self.z_min, self.z_max)
    }

    fn width(&self) -> usize {
        (self.z_max - self.z_min + 1) as usize
    }

    fn idx(&self, n: usize, m: i64) -> usize {
        n * self.width() + (m - self.z_min) as usize
    }

    pub fn in_range(&self, n: i64, m: i64) -> bool {
        n >= 0 && n as usize <= self.order && m >= self.z_min && m <= self.z_max
    }

    /// Coefficient at relative position (n, m); zero for n < 0, panics when
    /// the position is above the order or outside the window.
    pub fn get(&self, n: i64, m: i64) -> Q {
        if n < 0 {
            return Q::zero();
        }
        assert!(self.in_range(n, m), "({n}, {m}) outside the known region");
        self.coeffs[self.idx(n as usize, m)].clone()
    }

    fn get_ref(&self, n: usize, m: i64) -> &Q {
        &self.coeffs[self.idx(n, m)]
    }

    pub fn set(&mut self, n: usize, m: i64, c: Q) {
        assert!(self.in_range(n as i64, m));
        let i = self.idx(n, m);
        self.coeffs[i] = c;
    }

    pub fn add_at(&mut self, n: usize, m: i64, c: &Q) {
        assert!(self.in_range(n as i64, m));
        let i = self.idx(n, m);
        self.coeffs[i] += c;
    }

    /// Coefficient at absolute exponents, or `None` when they fall outside
    /// the known region. Exponents off the offset lattice give zero.
    pub fn coeff_at(&self, q_exp: &Q, z_exp: &Q) -> Option<Q> {
        let dn = q_exp - &self.q_offset;
        let dm = z_exp - &self.z_offset;
        match (as_i64(&dn), as_i64(&dm)) {
            (Some(n), Some(m)) => {
                if n < 0 {
                    Some(Q::zero())
                } else if self.in_range(n, m) {
                    Some(self.get(n, m))
                } else {
                    None
                }
            }
            _ if dn < Q::zero() => Some(Q::zero()),
            _ if dn > qi(self.order as i64) => None,
            _ => Some(Q::zero()),
        }
    }

    /// Nonzero terms as (n, m, c), ordered by n then m.
    pub fn terms(&self) -> Vec<(i64, i64, Q)> {
        let mut out = Vec::new();
        for n in 0..=self.order {
            for m in self.z_min..=self.z_max {
                let c = self.get_ref(n, m);
                if !c.is_zero() {
                    out.push((n as i64, m, c.clone()));
                }
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Smallest and largest m carrying a nonzero coefficient.
    pub fn z_support(&self) -> Option<(i64, i64)> {
        let t = self.terms();
        let lo = t.iter().map(|x| x.1).min()?;
        let hi = t.iter().map(|x| x.1).max()?;
        Some((lo, hi))
    }

    /// Coefficients of one q-layer, keyed by m.
    pub fn layer(&self, n: usize) -> BTreeMap<i64, Q> {
        let mut out = BTreeMap::new();
        for m in self.z_min..=self.z_max {
            let c = self.get_ref(n, m);
            if !c.is_zero() {
                out.insert(m, c.clone());
            }
        }
        out
    }

    /// Keep q-degrees up to `order`.
    pub fn truncate(&self, order: usize) -> QZSeries {
        let order = order.min(self.order);
        let mut out = self.clone();
        out.order = order;
        out.coeffs.truncate((order + 1) * self.width());
        out
    }

    /// Lower the completeness order without touching offsets.
    pub fn with_order(mut self, order: usize) -> QZSeries {
        if order < self.order {
            self = self.truncate(order);
        }
        self
    }

    /// Restrict (or pad with zeros) the z-window.
    pub fn rewindow(&self, window: (i64, i64)) -> QZSeries {
        let mut out = QZSeries::zero(self.q_offset.clone(), self.z_offset.clone(), self.order, window);
        for n in 0..=self.order {
            for m in window.0.max(self.z_min)..=window.1.min(self.z_max) {
                out.set(n, m, self.get(n as i64, m));
            }
        }
        out
    }

    /// Move the offsets to new values on the same lattice; the data is
    /// reindexed so that the represented series is unchanged.
    pub fn reoffset(&self, q_offset: Q, z_offset: Q) -> Result<QZSeries, QzError> {
        let dq = int_diff(&self.q_offset, &q_offset)?;
        let dz = int_diff(&self.z_offset, &z_offset)?;
        if dq < 0 {
            return Err(QzError::Malformed("new q-offset above the old one".into()));
        }
        let order = self.order + dq as usize;
        let mut out = QZSeries::zero(q_offset, z_offset, order, (self.z_min + dz, self.z_max + dz));
        for n in 0..=self.order {
            for m in self.z_min..=self.z_max {
                out.set(n + dq as usize, m + dz, self.get_ref(n, m).clone());
            }
        }
        Ok(out)
    }

    /// Multiply by c · q^{a} z^{b}; only the offsets and coefficients change.
    pub fn mul_monomial(&self, c: &Q, q_exp: &Q, z_exp: &Q) -> QZSeries {
        let mut out = self.clone();
        out.q_offset = &self.q_offset + q_exp;
        out.z_offset = &self.z_offset + z_exp;
        if !c.is_one() {
            for x in out.coeffs.iter_mut() {
                *x *= c;
            }
        }
        out
    }

    pub fn scale(&self, c: &Q) -> QZSeries {
        self.mul_monomial(c, &Q::zero(), &Q::zero())
    }

    /// Coefficientwise sum on the intersection of the known regions.
    pub fn add(&self, other: &QZSeries) -> Result<QZSeries, QzError> {
        let dq = int_diff(&self.q_offset, &other.q_offset)?;
        let dz = int_diff(&self.z_offset, &other.z_offset)?;
        // Express both on the lower q-offset and on self's z-offset.
        let (q_off, sa, sb) = if dq >= 0 { (self.q_offset.clone(), 0, dq) } else { (other.q_offset.clone(), -dq, 0) };
        let top = (self.order as i64 + sa).min(other.order as i64 + sb);
        let lo = self.z_min.max(other.z_min + dz);
        let hi = self.z_max.min(other.z_max + dz);
        if lo > hi || top < 0 {
            return Err(QzError::Malformed("disjoint known regions".into()));
        }
        let mut out = QZSeries::zero(q_off, self.z_offset.clone(), top as usize, (lo, hi));
        for n in 0..=top {
            for m in lo..=hi {
                let c = self.get(n - sa, m) + other.get(n - sb, m - dz);
                out.set(n as usize, m, c);
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &QZSeries) -> Result<QZSeries, QzError> {
        self.add(&other.scale(&-Q::one()))
    }

    /// Truncated Cauchy product. Offsets add, the order is the smaller of
    /// the two, the window is the sum window clipped to `bound`.
    pub fn mul(&self, other: &QZSeries, bound: Option<(i64, i64)>) -> QZSeries {
        let order = self.order.min(other.order);
        let mut lo = self.z_min + other.z_min;
        let mut hi = self.z_max + other.z_max;
        if let Some((blo, bhi)) = bound {
            lo = lo.max(blo);
            hi = hi.min(bhi);
        }
        let mut out = QZSeries::zero(&self.q_offset + &other.q_offset, &self.z_offset + &other.z_offset, order, (lo, hi.max(lo)));
        for (n1, m1, c1) in self.terms() {
            if n1 as usize > order {
                continue;
            }
            for n2 in 0..=(order - n1 as usize) {
                for m2 in other.z_min..=other.z_max {
                    let c2 = other.get_ref(n2, m2);
                    if c2.is_zero() {
                        continue;
                    }
                    let m = m1 + m2;
                    if m < lo || m > hi {
                        continue;
                    }
                    let i = out.idx(n1 as usize + n2, m);
                    out.coeffs[i] += &c1 * c2;
                }
            }
        }
        out
    }

    /// In place: self ← self / (1 − q^n z^m), within the known region.
    ///
    /// Uses g = f + q^n z^m g, filling entries in an order where the right
    /// side is already final. Contributions that would pass through a point
    /// outside the window are lost, so callers keep the window wide enough.
    pub fn div_one_minus_monomial(&mut self, n: usize, m: i64) -> Result<(), QzError> {
        if n == 0 && m == 0 {
            return Err(QzError::ZeroExponentFactor);
        }
        let ms: Vec<i64> = if n == 0 && m < 0 {
            (self.z_min..=self.z_max).rev().collect()
        } else {
            (self.z_min..=self.z_max).collect()
        };
        for a in n..=self.order {
            for &b in &ms {
                let src_m = b - m;
                if src_m < self.z_min || src_m > self.z_max {
                    continue;
                }
                let src = self.get_ref(a - n, src_m).clone();
                if !src.is_zero() {
                    self.add_at(a, b, &src);
                }
            }
        }
        Ok(())
    }

    /// In place: self ← self · (1 − q^n z^m).
    pub fn mul_one_minus_monomial(&mut self, n: usize, m: i64) {
        let ms: Vec<i64> = if m > 0 {
            (self.z_min..=self.z_max).rev().collect()
        } else {
            (self.z_min..=self.z_max).collect()
        };
        for a in (n..=self.order).rev() {
            for &b in &ms {
                let src_m = b - m;
                if src_m < self.z_min || src_m > self.z_max {
                    continue;
                }
                let src = self.get_ref(a - n, src_m).clone();
                if !src.is_zero() {
                    let i = self.idx(a, b);
                    self.coeffs[i] -= src;
                }
            }
        }
    }

    /// Σ_{t≥0} q^{tn} z^{tm}, truncated to `order` and the window.
    pub fn inv_one_minus_monomial(n: usize, m: i64, order: usize, window: (i64, i64)) -> Result<QZSeries, QzError> {
        if n == 0 && m == 0 {
            return Err(QzError::ZeroExponentFactor);
        }
        let mut s = QZSeries::one(order, window);
        s.div_one_minus_monomial(n, m)?;
        Ok(s)
    }

    /// Replace z by q^shift · z: the coefficient at (n, m) moves to
    /// (n + shift·m, m) and the q-offset moves by shift·z_offset.
    ///
    /// The q-offset is renormalised so the lowest image degree is 0. Reading
    /// the window as the support in every degree, image degree n′ needs
    /// source degrees ≤ n′ only, so every image degree up to the old order is
    /// complete and anything above is dropped. On a symmetric window [−R, R]
    /// that is the bound N − |shift|·R measured from the unrenormalised
    /// offset q_offset + shift·z_offset.
    pub fn substitute_z_qshift(&self, shift: i64) -> QZSeries {
        if shift == 0 {
            return self.clone();
        }
        let s_min = (shift * self.z_min).min(shift * self.z_max);
        let q_off = &self.q_offset + qi(shift) * &self.z_offset + qi(s_min);
        let mut out = QZSeries::zero(q_off, self.z_offset.clone(), self.order, (self.z_min, self.z_max));
        for n in 0..=self.order {
            for m in self.z_min..=self.z_max {
                let c = self.get_ref(n, m);
                if c.is_zero() {
                    continue;
                }
                let n2 = n as i64 + shift * m - s_min;
                if n2 >= 0 && n2 as usize <= self.order {
                    out.set(n2 as usize, m, c.clone());
                }
            }
        }
        out
    }

    /// Replace z by z⁻¹.
    pub fn invert_z(&self) -> QZSeries {
        let mut out = QZSeries::zero(self.q_offset.clone(), -&self.z_offset, self.order, (-self.z_max, -self.z_min));
        for n in 0..=self.order {
            for m in self.z_min..=self.z_max {
                out.set(n, -m, self.get_ref(n, m).clone());
            }
        }
        out
    }

    pub fn to_json(&self) -> SeriesJson {
        SeriesJson {
            q_offset: to_frac_string(&self.q_offset),
            z_offset: to_frac_string(&self.z_offset),
            order: self.order,
            window: [self.z_min, self.z_max],
            terms: self.terms().into_iter().map(|(n, m, c)| (n, m, to_frac_string(&c))).collect(),
        }
    }

    pub fn from_json(j: &SeriesJson) -> Result<QZSeries, QzError> {
        let bad = |w: &str| QzError::Malformed(w.to_string());
        let q_off = parse_q(&j.q_offset).ok_or_else(|| bad("q_offset"))?;
        let z_off = parse_q(&j.z_offset).ok_or_else(|| bad("z_offset"))?;
        let mut s = QZSeries::zero(q_off, z_off, j.order, (j.window[0], j.window[1]));
        for (n, m, c) in &j.terms {
            let c = parse_q(c).ok_or_else(|| bad("coefficient"))?;
            if !s.in_range(*n, *m) {
                return Err(bad("term outside the window"));
            }
            s.set(*n as usize, *m, c);
        }
        Ok(s)
    }

    /// Integer table: one row per q-degree, one column per z-exponent.
    pub fn text_table(&self) -> String {
        let (lo, hi) = self.z_support().unwrap_or((0, 0));
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["q\\z".to_string()];
        for m in lo..=hi {
            header.push(to_display(&(&self.z_offset + qi(m))));
        }
        rows.push(header);
        for n in 0..=self.order {
            let mut r = vec![to_display(&(&self.q_offset + qi(n as i64)))];
            for m in lo..=hi {
                r.push(to_display(self.get_ref(n, m)));
            }
            rows.push(r);
        }
        let ncol = rows[0].len();
        let widths: Vec<usize> = (0..ncol).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for r in &rows {
            let cells: Vec<String> = r.iter().enumerate().map(|(c, s)| format!("{:>w$}", s, w = widths[c])).collect();
            out.push_str(cells.join(" ").trim_end());
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for QZSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.terms();
        if t.is_empty() {
            return write!(f, "0 + O(q^{})", to_display(&(&self.q_offset + qi(self.order as i64 + 1))));
        }
        let parts: Vec<String> = t
            .iter()
            .map(|(n, m, c)| {
                format!(
                    "{}*q^{}*z^{}",
                    to_display(c),
                    to_display(&(&self.q_offset + qi(*n))),
                    to_display(&(&self.z_offset + qi(*m)))
                )
            })
            .collect();
        write!(f, "{} + O(q^{})", parts.join(" + "), to_display(&(&self.q_offset + qi(self.order as i64 + 1))))
    }
}

fn int_diff(a: &Q, b: &Q) -> Result<i64, QzError> {
    let d = b - a;
    as_i64(&d).ok_or_else(|| QzError::NonAlignableOffsets(to_display(&d)))
}

/// JSON form of a series; rationals are `"num/den"` strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesJson {
    pub q_offset: String,
    pub z_offset: String,
    pub order: usize,
    pub window: [i64; 2],
    pub terms: Vec<(i64, i64, String)>,
}

/// First position where two series disagree, in absolute exponents.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Discrepancy {
    pub q_exp: Q,
    pub z_exp: Q,
    pub left: Q,
    pub right: Q,
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "q^{} z^{}: {} vs {}",
            to_display(&self.q_exp),
            to_display(&self.z_exp),
            to_display(&self.left),
            to_display(&self.right)
        )
    }
}

/// Compare two series at every q-exponent ≤ `q_max` known to both.
///
/// Requires the offsets to lie on a common lattice; z-exponents outside
/// either window must be zero in the other series for agreement.
pub fn compare_up_to(a: &QZSeries, b: &QZSeries, q_max: &Q) -> Result<(), Discrepancy> {
    let mut positions: Vec<(Q, Q)> = Vec::new();
    for s in [a, b] {
        for (n, m, _) in s.terms() {
            let qe = &s.q_offset + qi(n);
            if &qe <= q_max {
                positions.push((qe, &s.z_offset + qi(m)));
            }
        }
    }
    positions.sort();
    positions.dedup();
    for (qe, ze) in positions {
        let l = a.coeff_at(&qe, &ze);
        let r = b.coeff_at(&qe, &ze);
        let (l, r) = match (l, r) {
            (Some(l), Some(r)) => (l, r),
            (Some(l), None) if qe > &a.q_offset + qi(a.order as i64) || qe > &b.q_offset + qi(b.order as i64) => {
                let _ = l;
                continue;
            }
            (l, r) => (l.unwrap_or_else(Q::zero), r.unwrap_or_else(Q::zero)),
        };
        if l != r {
            return Err(Discrepancy { q_exp: qe, z_exp: ze, left: l, right: r });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::q;

    fn mono(c: i64, qe: Q, ze: Q, order: usize) -> QZSeries {
        QZSeries::monomial(qi(c), qe, ze, order, (0, 0))
    }

    #[test]
    fn add_examples() {
        let a = mono(1, q(1, 2), qi(0), 3);
        let b = mono(1, q(3, 2), qi(0), 3);
        let s = a.add(&b).unwrap();
        assert_eq!(s.q_offset(), &q(1, 2));
        assert_eq!(s.get(0, 0), qi(1));
        assert_eq!(s.get(1, 0), qi(1));
        let zero = QZSeries::zero(q(1, 2), qi(0), 3, (0, 0));
        assert_eq!(a.add(&zero).unwrap(), a);
        let c = mono(1, q(1, 3), qi(0), 3);
        assert!(matches!(a.add(&c), Err(QzError::NonAlignableOffsets(_))));
    }

    #[test]
    fn geometric_series() {
        let s = QZSeries::inv_one_minus_monomial(1, 0, 4, (0, 0)).unwrap();
        assert!((0..=4).all(|n| s.get(n, 0) == qi(1)));
        let s = QZSeries::inv_one_minus_monomial(0, 1, 0, (0, 4)).unwrap();
        assert!((0..=4).all(|m| s.get(0, m) == qi(1)));
        let s = QZSeries::inv_one_minus_monomial(1, -1, 3, (-3, 0)).unwrap();
        for n in 0..=3 {
            for m in -3..=0 {
                assert_eq!(s.get(n, m), qi((n == -m) as i64));
            }
        }
        assert_eq!(QZSeries::inv_one_minus_monomial(0, 0, 3, (0, 0)), Err(QzError::ZeroExponentFactor));
        let s = QZSeries::inv_one_minus_monomial(0, -1, 0, (-3, 0)).unwrap();
        assert!((-3..=0).all(|m| s.get(0, m) == qi(1)));
    }

    #[test]
    fn telescoping_product() {
        let w = (0, 6);
        let geo = QZSeries::inv_one_minus_monomial(0, 1, 2, w).unwrap();
        let mut lin = QZSeries::one(2, w);
        lin.set(0, 1, qi(-1));
        let p = lin.mul(&geo, Some(w));
        assert_eq!(p.terms(), vec![(0, 0, qi(1))]);
    }

    #[test]
    fn partition_product() {
        let mut s = QZSeries::one(3, (0, 0));
        for n in 1..=3 {
            s.div_one_minus_monomial(n, 0).unwrap();
        }
        let got: Vec<Q> = (0..=3).map(|n| s.get(n, 0)).collect();
        assert_eq!(got, vec![qi(1), qi(1), qi(2), qi(3)]);
    }

    #[test]
    fn qshift_examples() {
        let a = mono(1, qi(0), qi(1), 3);
        let s = a.substitute_z_qshift(-1);
        assert_eq!(s.q_offset(), &qi(-1));
        assert_eq!(s.coeff_at(&qi(-1), &qi(1)), Some(qi(1)));
        assert_eq!(a.substitute_z_qshift(0), a);

        let mut b = QZSeries::one(2, (-1, 0));
        b.set(1, -1, qi(1));
        let s = b.substitute_z_qshift(-1);
        assert_eq!(s.q_offset(), &qi(0));
        assert_eq!(s.terms(), vec![(0, 0, qi(1)), (2, -1, qi(1))]);
        assert_eq!(s.order(), 2);
    }

    #[test]
    fn mul_one_minus_undoes_division() {
        for (n, m) in [(1, 0), (0, 1), (0, -1), (2, -1), (1, 1), (3, 2)] {
            let w = (-6, 6);
            let mut s = QZSeries::one(4, w);
            s.set(1, 2, q(1, 3));
            s.set(2, -1, qi(5));
            let orig = s.clone();
            s.div_one_minus_monomial(n, m).unwrap();
            s.mul_one_minus_monomial(n, m);
            // Entries fed only by in-window data are restored exactly.
            let inner = if n == 0 { (-1, 2) } else { w };
            assert_eq!(s.rewindow(inner), orig.rewindow(inner), "factor ({n},{m})");
        }
    }

    #[test]
    fn json_round_trip() {
        let mut s = QZSeries::zero(q(5, 48), q(1, 6), 2, (-1, 1));
        s.set(0, 0, qi(1));
        s.set(2, -1, q(-3, 7));
        let j = s.to_json();
        let text = serde_json::to_string(&j).unwrap();
        let back: SeriesJson = serde_json::from_str(&text).unwrap();
        assert_eq!(QZSeries::from_json(&back).unwrap(), s);
        assert!(text.contains("\"5/48\""));
    }

    #[test]
    fn compare_detects_difference() {
        let a = QZSeries::inv_one_minus_monomial(1, 0, 4, (0, 0)).unwrap();
        let mut b = a.clone();
        assert!(compare_up_to(&a, &b, &qi(4)).is_ok());
        b.set(3, 0, qi(2));
        let d = compare_up_to(&a, &b, &qi(4)).unwrap_err();
        assert_eq!(d.q_exp, qi(3));
        assert!(compare_up_to(&a, &b, &qi(2)).is_ok());
    }
}
