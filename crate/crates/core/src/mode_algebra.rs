//! Modes of the strong generators J, L, G⁺, G⁻, their brackets, and a
//! brute-force Verma-type module used as an oracle.
//!
//! Brackets are returned as [`ModeExpression`]s whose words may contain
//! composite atoms such as `(J²)_n`. Composites are infinite normal-ordered
//! sums; they are expanded only when acting on a state, with the sum cut
//! off at the depth of that state (every dropped term annihilates it).

use std::cell::RefCell;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;

use num_traits::{One, Zero};
use rand::Rng;
use thiserror::Error;

use crate::rat::{qi, to_display, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Gen {
    J,
    L,
    Gminus,
    Gplus,
}

impl Gen {
    pub const ALL: [Gen; 4] = [Gen::J, Gen::L, Gen::Gminus, Gen::Gplus];

    pub fn weight(self) -> i64 {
        match self {
            Gen::J => 1,
            _ => 2,
        }
    }

    /// J₀-charge carried by one mode.
    pub fn charge(self) -> i64 {
        match self {
            Gen::Gplus => 1,
            Gen::Gminus => -1,
            _ => 0,
        }
    }
}

/// `a_n` in the physics convention; the derived order is the PBW order
/// (J block, L block, G⁻ block, G⁺ block, increasing index in each block).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mode {
    pub gen: Gen,
    pub index: i64,
}

impl Mode {
    pub fn new(gen: Gen, index: i64) -> Self {
        Mode { gen, index }
    }

    pub fn j(n: i64) -> Self {
        Mode::new(Gen::J, n)
    }

    pub fn l(n: i64) -> Self {
        Mode::new(Gen::L, n)
    }

    pub fn gp(n: i64) -> Self {
        Mode::new(Gen::Gplus, n)
    }

    pub fn gm(n: i64) -> Self {
        Mode::new(Gen::Gminus, n)
    }

    /// Creation operators of the oracle module: J, L, G⁻ with n ≤ −1 and
    /// G⁺ with n ≤ 0.
    pub fn is_creation(&self) -> bool {
        match self.gen {
            Gen::Gplus => self.index <= 0,
            _ => self.index < 0,
        }
    }

    pub fn is_cartan(&self) -> bool {
        self.index == 0 && matches!(self.gen, Gen::J | Gen::L)
    }

    pub fn is_annihilator(&self) -> bool {
        !self.is_creation() && !self.is_cartan()
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = match self.gen {
            Gen::J => "J",
            Gen::L => "L",
            Gen::Gminus => "G-",
            Gen::Gplus => "G+",
        };
        write!(f, "{}_{}", g, self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CompositeTag {
    J2,
    LJ,
    J3,
    JdJ,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompositeMode {
    pub tag: CompositeTag,
    pub index: i64,
}

impl fmt::Display for CompositeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = match self.tag {
            CompositeTag::J2 => "(J^2)",
            CompositeTag::LJ => "(LJ)",
            CompositeTag::J3 => "(J^3)",
            CompositeTag::JdJ => "(JdJ)",
        };
        write!(f, "{}_{}", t, self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Mode(Mode),
    Composite(CompositeMode),
}

impl Atom {
    pub fn index(&self) -> i64 {
        match self {
            Atom::Mode(m) => m.index,
            Atom::Composite(c) => c.index,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Mode(m) => m.fmt(f),
            Atom::Composite(c) => c.fmt(f),
        }
    }
}

/// Linear combination of words; a word acts right to left, the empty word
/// is the identity.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModeExpression {
    terms: BTreeMap<Vec<Atom>, Q>,
}

impl ModeExpression {
    pub fn zero() -> Self {
        ModeExpression::default()
    }

    pub fn constant(c: Q) -> Self {
        let mut e = ModeExpression::zero();
        e.add_term(Vec::new(), c);
        e
    }

    pub fn atom(a: Atom, c: Q) -> Self {
        let mut e = ModeExpression::zero();
        e.add_term(vec![a], c);
        e
    }

    pub fn mode(m: Mode) -> Self {
        ModeExpression::atom(Atom::Mode(m), Q::one())
    }

    pub fn word(w: Vec<Mode>) -> Self {
        let mut e = ModeExpression::zero();
        e.add_term(w.into_iter().map(Atom::Mode).collect(), Q::one());
        e
    }

    pub fn add_term(&mut self, w: Vec<Atom>, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(w) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add(&mut self, other: &ModeExpression) {
        for (w, c) in &other.terms {
            self.add_term(w.clone(), c.clone());
        }
    }

    pub fn add_scaled(&mut self, other: &ModeExpression, s: &Q) {
        for (w, c) in &other.terms {
            self.add_term(w.clone(), c * s);
        }
    }

    pub fn scale(&self, s: &Q) -> ModeExpression {
        let mut out = ModeExpression::zero();
        out.add_scaled(self, s);
        out
    }

    /// Operator product: `self` acts after `other`.
    pub fn mul(&self, other: &ModeExpression) -> ModeExpression {
        let mut out = ModeExpression::zero();
        for (w1, c1) in &self.terms {
            for (w2, c2) in &other.terms {
                let mut w = w1.clone();
                w.extend_from_slice(w2);
                out.add_term(w, c1 * c2);
            }
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<Atom>, &Q)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, w: &[Atom]) -> Q {
        self.terms.get(w).cloned().unwrap_or_else(Q::zero)
    }

    pub fn has_composites(&self) -> bool {
        self.terms.keys().flatten().any(|a| matches!(a, Atom::Composite(_)))
    }
}

impl fmt::Display for ModeExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(w, c)| {
                if w.is_empty() {
                    to_display(c)
                } else {
                    let ws: Vec<String> = w.iter().map(|a| a.to_string()).collect();
                    format!("{}*{}", to_display(c), ws.join(" "))
                }
            })
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

pub fn central_charge(k: &Q) -> Q {
    let num = qi(-2) * (qi(9) + qi(16) * k + qi(6) * k * k);
    num / (k + qi(3))
}

/// The bracket [a, b], computed for the canonically ordered pair and negated
/// otherwise, so antisymmetry holds by construction.
pub fn commutator(a: Mode, b: Mode, k: &Q) -> ModeExpression {
    if a > b {
        return commutator(b, a, k).scale(&-Q::one());
    }
    let (m, n) = (a.index, b.index);
    let qm = qi(m);
    let qn = qi(n);
    let mut out = ModeExpression::zero();
    use Gen::*;
    match (a.gen, b.gen) {
        (J, J) => {
            if m + n == 0 {
                out.add_term(vec![], (k + qi(2)) * &qm);
            }
        }
        (J, L) => {
            // [J_m, L_n] = −[L_n, J_m] = m J_{m+n}
            out.add_term(vec![Atom::Mode(Mode::j(m + n))], qm);
        }
        (J, Gminus) => out.add_term(vec![Atom::Mode(Mode::gm(m + n))], -Q::one()),
        (J, Gplus) => out.add_term(vec![Atom::Mode(Mode::gp(m + n))], Q::one()),
        (L, L) => {
            if m + n == 0 {
                out.add_term(vec![], central_charge(k) / qi(12) * qi(m * m * m - m));
            }
            out.add_term(vec![Atom::Mode(Mode::l(m + n))], &qm - &qn);
        }
        (L, Gminus) => out.add_term(vec![Atom::Mode(Mode::gm(m + n))], &qm - &qn),
        (L, Gplus) => out.add_term(vec![Atom::Mode(Mode::gp(m + n))], &qm - &qn),
        (Gminus, Gminus) | (Gplus, Gplus) => {}
        (Gminus, Gplus) => {
            return gplus_gminus(n, m, k).scale(&-Q::one());
        }
        _ => unreachable!("pairs are ordered"),
    }
    out
}

/// [G⁺_m, G⁻_n].
fn gplus_gminus(m: i64, n: i64, k: &Q) -> ModeExpression {
    let two = qi(2);
    let k1 = k + qi(1);
    let k2 = k + qi(2);
    let k3 = k + qi(3);
    let a = qi(3) + &two * k;
    let s = m + n;
    let mut out = ModeExpression::zero();
    if s == 0 {
        out.add_term(vec![], -(&k1 * &k2 * &k2) / &two * qi(m * m * m - m));
    }
    out.add_term(vec![Atom::Mode(Mode::l(s))], &k2 * &k3 / &two * qi(m - n));
    let jc = qi(3) * &k1 * &k2 / &two * qi((m + 1) * (n + 1)) - (qi(5) + qi(4) * k + k * k) / &two * qi((s + 1) * (s + 2));
    out.add_term(vec![Atom::Mode(Mode::j(s))], jc);
    let comp = |tag| Atom::Composite(CompositeMode { tag, index: s });
    out.add_term(vec![comp(CompositeTag::J2)], -(&a * qi(m + 1)));
    out.add_term(vec![comp(CompositeTag::LJ)], k3);
    out.add_term(vec![comp(CompositeTag::J3)], -Q::one());
    out.add_term(vec![comp(CompositeTag::JdJ)], -a);
    out
}

#[derive(Clone, Copy)]
enum Field {
    J,
    L,
    DJ,
    J2,
}

impl Field {
    fn weight(self) -> i64 {
        match self {
            Field::J => 1,
            _ => 2,
        }
    }
}

/// How plain modes are rewritten while expanding; `Psi` substitutes the
/// twist into every constituent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Twist {
    None,
    Psi,
}

fn map_mode(m: Mode, twist: Twist, k: &Q) -> ModeExpression {
    match twist {
        Twist::None => ModeExpression::mode(m),
        Twist::Psi => psi_mode(m, k),
    }
}

/// Mode `f_m` of a field acting on a state of depth `cutoff`.
fn field_mode(f: Field, m: i64, cutoff: i64, twist: Twist, k: &Q) -> ModeExpression {
    if cutoff - m < 0 {
        return ModeExpression::zero();
    }
    match f {
        Field::J => map_mode(Mode::j(m), twist, k),
        Field::L => map_mode(Mode::l(m), twist, k),
        Field::DJ => map_mode(Mode::j(m), twist, k).scale(&qi(-(m + 1))),
        Field::J2 => normal_product(Field::J, Field::J, m, cutoff, twist, k),
    }
}

/// `:ab:_n = Σ_{j≤−Δa} a_j b_{n−j} + Σ_{j>−Δa} b_{n−j} a_j`, keeping the
/// terms that can be nonzero on a state of depth `cutoff`.
fn normal_product(a: Field, b: Field, n: i64, cutoff: i64, twist: Twist, k: &Q) -> ModeExpression {
    let mut out = ModeExpression::zero();
    if cutoff - n < 0 {
        return out;
    }
    let da = a.weight();
    for j in (n - cutoff)..=(-da) {
        let right = field_mode(b, n - j, cutoff, twist, k);
        if right.is_zero() {
            continue;
        }
        let left = field_mode(a, j, cutoff - (n - j), twist, k);
        out.add(&left.mul(&right));
    }
    for j in (1 - da)..=cutoff {
        let right = field_mode(a, j, cutoff, twist, k);
        if right.is_zero() {
            continue;
        }
        let left = field_mode(b, n - j, cutoff - j, twist, k);
        out.add(&left.mul(&right));
    }
    out
}

/// Plain-mode expansion of a composite mode, exact on states of depth at
/// most `cutoff`.
pub fn expand_composite(c: CompositeMode, cutoff: i64) -> ModeExpression {
    expand_composite_twisted(c, cutoff, Twist::None, &Q::zero())
}

pub fn expand_composite_twisted(c: CompositeMode, cutoff: i64, twist: Twist, k: &Q) -> ModeExpression {
    let n = c.index;
    match c.tag {
        CompositeTag::J2 => normal_product(Field::J, Field::J, n, cutoff, twist, k),
        CompositeTag::LJ => normal_product(Field::L, Field::J, n, cutoff, twist, k),
        CompositeTag::J3 => normal_product(Field::J, Field::J2, n, cutoff, twist, k),
        CompositeTag::JdJ => normal_product(Field::J, Field::DJ, n, cutoff, twist, k),
    }
}

/// The twist on modes.
pub fn psi_mode(a: Mode, k: &Q) -> ModeExpression {
    let n = a.index;
    let mut out = ModeExpression::zero();
    match a.gen {
        Gen::J => {
            out.add_term(vec![Atom::Mode(a)], Q::one());
            if n == 0 {
                out.add_term(vec![], -(k + qi(2)));
            }
        }
        Gen::L => {
            out.add_term(vec![Atom::Mode(a)], Q::one());
            out.add_term(vec![Atom::Mode(Mode::j(n))], -Q::one());
            if n == 0 {
                out.add_term(vec![], (k + qi(2)) / qi(2));
            }
        }
        Gen::Gplus => out.add_term(vec![Atom::Mode(Mode::gp(n - 1))], Q::one()),
        Gen::Gminus => out.add_term(vec![Atom::Mode(Mode::gm(n + 1))], Q::one()),
    }
    out
}

pub fn g_eigenvalue(xi: &Q, chi: &Q, k: &Q) -> Q {
    let inner = qi(2) + qi(3) * k + k * k - qi(2) * xi * xi + qi(6) * chi + qi(2) * k * chi;
    -(xi * inner) / qi(2)
}

/// h_i as the average of g over ξ, ξ+1, …, ξ+i−1.
pub fn h_poly_sum(i: i64, xi: &Q, chi: &Q, k: &Q) -> Q {
    assert!(i >= 1);
    let mut s = Q::zero();
    for m in 0..i {
        s += g_eigenvalue(&(xi + qi(m)), chi, k);
    }
    s / qi(i)
}

/// h_i from its factored closed form; accepts rational i.
pub fn h_poly_closed(i: &Q, xi: &Q, chi: &Q, k: &Q) -> Q {
    let two = qi(2);
    let lead = (&two * xi + i - qi(1)) / qi(4);
    let rest = qi(-2) - i + i * i - qi(3) * k - k * k - &two * xi + &two * i * xi + &two * xi * xi - qi(6) * chi - &two * k * chi;
    lead * rest
}

/// Both forms; they must agree.
pub fn h_poly(i: i64, xi: &Q, chi: &Q, k: &Q) -> Q {
    let s = h_poly_sum(i, xi, chi, k);
    debug_assert_eq!(s, h_poly_closed(&qi(i), xi, chi, k));
    s
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModeError {
    #[error("state of depth {0} exceeds the module depth {1}")]
    DepthOverflow(i64, i64),
}

/// A vector of the oracle module: PBW monomials of creation modes (applied
/// to v, rightmost first) with rational coefficients.
pub type State = BTreeMap<Vec<Mode>, Q>;

type Vector = HashMap<u32, Q>;

struct Engine {
    xi: Q,
    chi: Q,
    k: Q,
    cap: i64,
    monos: Vec<Vec<Mode>>,
    ids: HashMap<Vec<Mode>, u32>,
    depth: Vec<i64>,
    charge: Vec<i64>,
    memo: HashMap<(Mode, u32), Rc<Vec<(u32, Q)>>>,
    brackets: HashMap<(Mode, Mode), Rc<ModeExpression>>,
    expansions: HashMap<(CompositeMode, i64, Twist), Rc<ModeExpression>>,
}

impl Engine {
    fn new(xi: Q, chi: Q, k: Q, cap: i64) -> Self {
        let mut e = Engine {
            xi,
            chi,
            k,
            cap,
            monos: Vec::new(),
            ids: HashMap::new(),
            depth: Vec::new(),
            charge: Vec::new(),
            memo: HashMap::new(),
            brackets: HashMap::new(),
            expansions: HashMap::new(),
        };
        e.intern(Vec::new());
        e
    }

    fn intern(&mut self, m: Vec<Mode>) -> u32 {
        if let Some(&id) = self.ids.get(&m) {
            return id;
        }
        let id = self.monos.len() as u32;
        self.depth.push(-m.iter().map(|x| x.index).sum::<i64>());
        self.charge.push(m.iter().map(|x| x.gen.charge()).sum());
        self.ids.insert(m.clone(), id);
        self.monos.push(m);
        id
    }

    fn bracket(&mut self, a: Mode, b: Mode) -> Rc<ModeExpression> {
        if let Some(e) = self.brackets.get(&(a, b)) {
            return e.clone();
        }
        let e = Rc::new(commutator(a, b, &self.k));
        self.brackets.insert((a, b), e.clone());
        e
    }

    fn apply_mode(&mut self, x: Mode, id: u32) -> Result<Rc<Vec<(u32, Q)>>, ModeError> {
        if let Some(r) = self.memo.get(&(x, id)) {
            return Ok(r.clone());
        }
        let d = self.depth[id as usize];
        let nd = d - x.index;
        let result: Vec<(u32, Q)> = if nd < 0 {
            Vec::new()
        } else if nd > self.cap {
            return Err(ModeError::DepthOverflow(nd, self.cap));
        } else if x.is_cartan() {
            let ev = if x.gen == Gen::J { &self.xi + qi(self.charge[id as usize]) } else { &self.chi + qi(d) };
            if ev.is_zero() { Vec::new() } else { vec![(id, ev)] }
        } else {
            let mono = self.monos[id as usize].clone();
            if mono.is_empty() {
                if x.is_creation() {
                    vec![(self.intern(vec![x]), Q::one())]
                } else {
                    Vec::new()
                }
            } else if x.is_creation() && x <= mono[0] {
                let mut m = Vec::with_capacity(mono.len() + 1);
                m.push(x);
                m.extend_from_slice(&mono);
                vec![(self.intern(m), Q::one())]
            } else {
                // x m₁ rest = m₁ (x rest) + [x, m₁] rest
                let m1 = mono[0];
                let rest = self.intern(mono[1..].to_vec());
                let rest_depth = self.depth[rest as usize];
                let mut acc: Vector = HashMap::new();
                let inner = self.apply_mode(x, rest)?;
                let inner: Vector = inner.iter().cloned().collect();
                let left = self.apply_mode_vec(m1, &inner)?;
                add_into(&mut acc, &left, &Q::one());
                let br = self.bracket(x, m1);
                let single: Vector = [(rest, Q::one())].into_iter().collect();
                let right = self.apply_expr(&br, &single, rest_depth, Twist::None)?;
                add_into(&mut acc, &right, &Q::one());
                let mut v: Vec<(u32, Q)> = acc.into_iter().collect();
                v.sort_by_key(|t| t.0);
                v
            }
        };
        let r = Rc::new(result);
        self.memo.insert((x, id), r.clone());
        Ok(r)
    }

    fn apply_mode_vec(&mut self, x: Mode, v: &Vector) -> Result<Vector, ModeError> {
        let mut acc: Vector = HashMap::new();
        for (&id, c) in v {
            let r = self.apply_mode(x, id)?;
            for (id2, c2) in r.iter() {
                let e = acc.entry(*id2).or_insert_with(Q::zero);
                *e += c * c2;
            }
        }
        acc.retain(|_, c| !c.is_zero());
        Ok(acc)
    }

    fn expansion(&mut self, c: CompositeMode, depth: i64, twist: Twist) -> Rc<ModeExpression> {
        if let Some(e) = self.expansions.get(&(c, depth, twist)) {
            return e.clone();
        }
        let e = Rc::new(expand_composite_twisted(c, depth, twist, &self.k));
        self.expansions.insert((c, depth, twist), e.clone());
        e
    }

    fn apply_atom(&mut self, a: Atom, v: &Vector, depth: i64, twist: Twist) -> Result<Vector, ModeError> {
        if depth - a.index() < 0 {
            return Ok(HashMap::new());
        }
        match a {
            Atom::Mode(m) => match twist {
                Twist::None => self.apply_mode_vec(m, v),
                Twist::Psi => {
                    let e = psi_mode(m, &self.k);
                    self.apply_expr(&e, v, depth, Twist::None)
                }
            },
            Atom::Composite(c) => {
                let e = self.expansion(c, depth, twist);
                self.apply_expr(&e, v, depth, Twist::None)
            }
        }
    }

    /// `v` must be homogeneous of the given depth.
    fn apply_expr(&mut self, e: &ModeExpression, v: &Vector, depth: i64, twist: Twist) -> Result<Vector, ModeError> {
        let mut acc: Vector = HashMap::new();
        for (w, c) in e.terms() {
            let mut cur = v.clone();
            let mut d = depth;
            for a in w.iter().rev() {
                if cur.is_empty() {
                    break;
                }
                cur = self.apply_atom(*a, &cur, d, twist)?;
                d -= a.index();
            }
            add_into(&mut acc, &cur, c);
        }
        acc.retain(|_, c| !c.is_zero());
        Ok(acc)
    }
}

fn add_into(acc: &mut Vector, v: &Vector, s: &Q) {
    for (id, c) in v {
        let e = acc.entry(*id).or_insert_with(Q::zero);
        *e += c * s;
    }
}

/// Verma-type module generated by |ξ,χ⟩ over the creation modes, cut at
/// L₀-depth `depth`. Acting past that depth is an error.
pub struct TruncatedHWModule {
    pub xi: Q,
    pub chi: Q,
    pub k: Q,
    pub depth: i64,
    engine: RefCell<Engine>,
}

impl TruncatedHWModule {
    pub fn new(xi: Q, chi: Q, k: Q, depth: i64) -> Self {
        let engine = RefCell::new(Engine::new(xi.clone(), chi.clone(), k.clone(), depth));
        TruncatedHWModule { xi, chi, k, depth, engine }
    }

    pub fn vacuum(&self) -> State {
        [(Vec::new(), Q::one())].into_iter().collect()
    }

    /// PBW monomials of depth ≤ `depth` with at most `max_top` factors G⁺₀.
    pub fn basis(&self, max_top: usize) -> Vec<Vec<Mode>> {
        let mut creators = Vec::new();
        for g in Gen::ALL {
            let lo = -self.depth;
            let hi = if g == Gen::Gplus { 0 } else { -1 };
            for n in lo..=hi {
                creators.push(Mode::new(g, n));
            }
        }
        creators.sort();
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(cs: &[Mode], start: usize, budget: i64, tops: usize, max_top: usize, cur: &mut Vec<Mode>, out: &mut Vec<Vec<Mode>>) {
            out.push(cur.clone());
            for i in start..cs.len() {
                let m = cs[i];
                let cost = -m.index;
                if cost > budget {
                    continue;
                }
                let is_top = m == Mode::gp(0);
                if is_top && tops >= max_top {
                    continue;
                }
                cur.push(m);
                rec(cs, i, budget - cost, tops + is_top as usize, max_top, cur, out);
                cur.pop();
            }
        }
        rec(&creators, 0, self.depth, 0, max_top, &mut cur, &mut out);
        out
    }

    fn to_vector(&self, s: &State) -> (Vector, Option<i64>) {
        let mut e = self.engine.borrow_mut();
        let mut v = HashMap::new();
        let mut depth = None;
        for (m, c) in s {
            if c.is_zero() {
                continue;
            }
            let id = e.intern(m.clone());
            let d = e.depth[id as usize];
            assert!(depth.is_none() || depth == Some(d), "state must be homogeneous in depth");
            depth = Some(d);
            v.insert(id, c.clone());
        }
        (v, depth)
    }

    fn to_state(&self, v: &Vector) -> State {
        let e = self.engine.borrow();
        v.iter().filter(|(_, c)| !c.is_zero()).map(|(id, c)| (e.monos[*id as usize].clone(), c.clone())).collect()
    }

    pub fn act(&self, expr: &ModeExpression, s: &State) -> Result<State, ModeError> {
        self.act_twisted(expr, s, Twist::None)
    }

    /// Act with every mode of `expr` (including composite constituents)
    /// replaced according to `twist`.
    pub fn act_twisted(&self, expr: &ModeExpression, s: &State, twist: Twist) -> Result<State, ModeError> {
        let (v, depth) = self.to_vector(s);
        let Some(depth) = depth else { return Ok(State::new()) };
        let r = self.engine.borrow_mut().apply_expr(expr, &v, depth, twist)?;
        Ok(self.to_state(&r))
    }

    pub fn act_mode(&self, m: Mode, s: &State) -> Result<State, ModeError> {
        self.act(&ModeExpression::mode(m), s)
    }

    pub fn depth_of(m: &[Mode]) -> i64 {
        -m.iter().map(|x| x.index).sum::<i64>()
    }
}

/// A nonzero value of the Jacobiator on a basis state.
#[derive(Clone, Debug)]
pub struct JacobiViolation {
    pub triple: [Mode; 3],
    pub state: Vec<Mode>,
    pub residual: State,
}

#[derive(Clone, Debug, Default)]
pub struct JacobiReport {
    pub triples: usize,
    /// (triple, state) pairs evaluated inside the truncation.
    pub checked: usize,
    /// Pairs whose evaluation would leave the truncated module.
    pub skipped: usize,
    pub violations: Vec<JacobiViolation>,
}

pub fn modes_up_to(bound: i64) -> Vec<Mode> {
    let mut out = Vec::new();
    for g in Gen::ALL {
        for n in -bound..=bound {
            out.push(Mode::new(g, n));
        }
    }
    out
}

/// Jacobiator [a,[b,c]] − [b,[a,c]] − [[a,b],c] on a module, with inner
/// brackets taken from the formulas and outer ones as operator commutators.
///
/// Built from antisymmetric brackets it is totally antisymmetric in
/// (a, b, c), so only strictly increasing triples are evaluated.
pub fn jacobi_check(bound: i64, depth: i64, xi: Q, chi: Q, k: Q, max_top: usize) -> JacobiReport {
    let module = TruncatedHWModule::new(xi, chi, k.clone(), depth);
    let basis = module.basis(max_top);
    let modes = modes_up_to(bound);
    let mut report = JacobiReport::default();
    let mut e = module.engine.borrow_mut();
    let ids: Vec<u32> = basis.iter().map(|m| e.intern(m.clone())).collect();
    for (ia, &a) in modes.iter().enumerate() {
        for (ib, &b) in modes.iter().enumerate().skip(ia + 1) {
            for &c in modes.iter().skip(ib + 1) {
                report.triples += 1;
                let (x, y, z) = (a.index, b.index, c.index);
                let lowest = [x, y, z, x + y, x + z, y + z, x + y + z].into_iter().min().unwrap();
                let fbc = commutator(b, c, &k);
                let fac = commutator(a, c, &k);
                let fab = commutator(a, b, &k);
                for (&id, mono) in ids.iter().zip(&basis) {
                    let d = e.depth[id as usize];
                    if d - (x + y + z) < 0 {
                        continue;
                    }
                    if d - lowest > depth {
                        report.skipped += 1;
                        continue;
                    }
                    match jacobiator(&mut e, a, b, c, &fbc, &fac, &fab, id) {
                        Ok(r) => {
                            report.checked += 1;
                            if !r.is_empty() {
                                let residual = r.iter().map(|(id, c)| (e.monos[*id as usize].clone(), c.clone())).collect();
                                report.violations.push(JacobiViolation { triple: [a, b, c], state: mono.clone(), residual });
                            }
                        }
                        Err(_) => report.skipped += 1,
                    }
                }
            }
        }
    }
    report
}

#[allow(clippy::too_many_arguments)]
fn jacobiator(
    e: &mut Engine,
    a: Mode,
    b: Mode,
    c: Mode,
    fbc: &ModeExpression,
    fac: &ModeExpression,
    fab: &ModeExpression,
    id: u32,
) -> Result<Vector, ModeError> {
    let d = e.depth[id as usize];
    let s: Vector = [(id, Q::one())].into_iter().collect();
    let one = Q::one();
    let minus = -Q::one();
    let mut acc: Vector = HashMap::new();
    // [x, E] s = x(E s) − E(x s)
    let outer = |e: &mut Engine, x: Mode, ex: &ModeExpression, sign: &Q, acc: &mut Vector| -> Result<(), ModeError> {
        let es = e.apply_expr(ex, &s, d, Twist::None)?;
        let t1 = e.apply_mode_vec(x, &es)?;
        let xs = e.apply_mode_vec(x, &s)?;
        let t2 = e.apply_expr(ex, &xs, d - x.index, Twist::None)?;
        add_into(acc, &t1, sign);
        add_into(acc, &t2, &-sign.clone());
        Ok(())
    };
    outer(e, a, fbc, &one, &mut acc)?;
    outer(e, b, fac, &minus, &mut acc)?;
    // −[F(a,b), c] = [c, F(a,b)]
    outer(e, c, fab, &one, &mut acc)?;
    acc.retain(|_, c| !c.is_zero());
    Ok(acc)
}

/// Checks ψ(a)ψ(b) − ψ(b)ψ(a) = ψ([a,b]) on every basis state where both
/// sides stay inside the truncation. Returns (checked, failures).
pub fn psi_bracket_check(bound: i64, module: &TruncatedHWModule, max_top: usize) -> (usize, Vec<(Mode, Mode, Vec<Mode>)>) {
    let basis = module.basis(max_top);
    let modes = modes_up_to(bound);
    let mut checked = 0;
    let mut failures = Vec::new();
    for (ia, &a) in modes.iter().enumerate() {
        for &b in modes.iter().skip(ia + 1) {
            let mut ab = ModeExpression::word(vec![a, b]);
            ab.add_term(vec![Atom::Mode(b), Atom::Mode(a)], -Q::one());
            let f = commutator(a, b, &module.k);
            for mono in &basis {
                let s: State = [(mono.clone(), Q::one())].into_iter().collect();
                let lhs = module.act_twisted(&ab, &s, Twist::Psi);
                let rhs = module.act_twisted(&f, &s, Twist::Psi);
                match (lhs, rhs) {
                    (Ok(l), Ok(r)) => {
                        checked += 1;
                        if l != r {
                            failures.push((a, b, mono.clone()));
                        }
                    }
                    _ => continue,
                }
            }
        }
    }
    (checked, failures)
}

/// Uniform random rational with numerator in [−range, range] and
/// denominator in [1, den].
pub fn random_rational<R: Rng>(rng: &mut R, range: i64, den: i64) -> Q {
    let d = rng.gen_range(1..=den);
    let n = rng.gen_range(-range * d..=range * d);
    Q::new(n.into(), d.into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::q;

    fn k0() -> Q {
        q(-5, 3)
    }

    #[test]
    fn bracket_examples() {
        let k = q(2, 7);
        assert_eq!(commutator(Mode::j(1), Mode::j(-1), &k), ModeExpression::constant(&k + qi(2)));
        assert_eq!(commutator(Mode::j(2), Mode::gp(-1), &k), ModeExpression::mode(Mode::gp(1)));
        assert_eq!(commutator(Mode::l(1), Mode::l(-1), &k), ModeExpression::mode(Mode::l(0)).scale(&qi(2)));
        assert_eq!(commutator(Mode::l(2), Mode::j(-1), &k), ModeExpression::mode(Mode::j(1)));
        assert!(commutator(Mode::gp(1), Mode::gp(-1), &k).is_zero());
    }

    #[test]
    fn brackets_are_antisymmetric() {
        let k = q(-7, 4);
        let ms = modes_up_to(4);
        for &a in &ms {
            for &b in &ms {
                let ab = commutator(a, b, &k);
                let ba = commutator(b, a, &k);
                let mut s = ab.clone();
                s.add(&ba);
                assert!(s.is_zero(), "[{a},{b}]");
            }
        }
    }

    #[test]
    fn composite_on_vacuum_vector() {
        let (xi, chi, k) = (q(2, 5), q(-1, 3), q(3, 7));
        let m = TruncatedHWModule::new(xi.clone(), chi.clone(), k, 3);
        let v = m.vacuum();
        let val = |tag| {
            let e = ModeExpression::atom(Atom::Composite(CompositeMode { tag, index: 0 }), Q::one());
            m.act(&e, &v).unwrap().get(&vec![]).cloned().unwrap_or_else(Q::zero)
        };
        assert_eq!(val(CompositeTag::J2), &xi * &xi);
        assert_eq!(val(CompositeTag::LJ), (&chi + qi(1)) * &xi);
        assert_eq!(val(CompositeTag::J3), &xi * &xi * &xi);
        assert_eq!(val(CompositeTag::JdJ), -(&xi * &xi));
    }

    #[test]
    fn composites_vanish_above_cutoff() {
        for tag in [CompositeTag::J2, CompositeTag::LJ, CompositeTag::J3, CompositeTag::JdJ] {
            assert!(expand_composite(CompositeMode { tag, index: 7 }, 3).is_zero());
        }
        assert!(!expand_composite(CompositeMode { tag: CompositeTag::J3, index: -2 }, 1).has_composites());
    }

    #[test]
    fn cartan_modes_are_diagonal() {
        let (xi, chi) = (q(1, 3), q(1, 6));
        let m = TruncatedHWModule::new(xi.clone(), chi.clone(), k0(), 3);
        for mono in m.basis(2) {
            let s: State = [(mono.clone(), Q::one())].into_iter().collect();
            let d = TruncatedHWModule::depth_of(&mono);
            let ch: i64 = mono.iter().map(|x| x.gen.charge()).sum();
            let l0 = m.act_mode(Mode::l(0), &s).unwrap();
            let j0 = m.act_mode(Mode::j(0), &s).unwrap();
            let scaled = |c: Q| -> State { if c.is_zero() { State::new() } else { [(mono.clone(), c)].into_iter().collect() } };
            assert_eq!(l0, scaled(&chi + qi(d)));
            assert_eq!(j0, scaled(&xi + qi(ch)));
        }
    }

    #[test]
    fn l0_on_j_minus_one() {
        let (xi, chi) = (q(1, 2), q(3, 5));
        let m = TruncatedHWModule::new(xi, chi.clone(), q(1, 3), 2);
        let s: State = [(vec![Mode::j(-1)], Q::one())].into_iter().collect();
        let r = m.act_mode(Mode::l(0), &s).unwrap();
        assert_eq!(r.get(&vec![Mode::j(-1)]), Some(&(chi + qi(1))));
    }

    #[test]
    fn g_matches_module() {
        let (xi, chi, k) = (q(-1, 3), q(1, 6), k0());
        assert_eq!(g_eigenvalue(&xi, &chi, &k), Q::zero());
        let m = TruncatedHWModule::new(q(3, 4), q(-2, 9), q(5, 11), 1);
        let r = m.act(&ModeExpression::word(vec![Mode::gm(0), Mode::gp(0)]), &m.vacuum()).unwrap();
        assert_eq!(r.get(&vec![]).cloned().unwrap_or_else(Q::zero), g_eigenvalue(&q(3, 4), &q(-2, 9), &q(5, 11)));
    }

    #[test]
    fn h_closed_form() {
        let (xi, chi, k) = (q(2, 3), q(-1, 5), q(7, 2));
        for i in 1..=8 {
            assert_eq!(h_poly_sum(i, &xi, &chi, &k), h_poly_closed(&qi(i), &xi, &chi, &k));
        }
        assert_eq!(h_poly(1, &xi, &chi, &k), g_eigenvalue(&xi, &chi, &k));
    }

    #[test]
    fn psi_examples() {
        let k = k0();
        assert_eq!(psi_mode(Mode::gp(0), &k), ModeExpression::mode(Mode::gp(-1)));
        assert_eq!(psi_mode(Mode::j(1), &k), ModeExpression::mode(Mode::j(1)));
    }

    #[test]
    fn small_jacobi() {
        let r = jacobi_check(1, 2, q(1, 3), q(2, 7), q(-5, 3), 1);
        assert!(r.violations.is_empty(), "{:?}", r.violations.first());
        assert!(r.checked > 0);
    }
}
