//! Free products of finitely generated abelian groups with peripheral
//! structure, their Dehn fillings, and kernel membership.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{LabError, Result};
use crate::lattice::{mat_vec, smith, Smith};

/// Canonical coordinates of a factor element: free part first, then torsion
/// residues in `[0, d)`.
pub type Coords = SmallVec<[i64; 2]>;

const TABLE_CAP: usize = 1 << 22;

#[derive(Debug, Clone)]
enum FactorMetric {
    /// no relations: word length is the l1 norm of the exponent vector
    Free,
    /// finite group, distances from the identity by BFS
    Table { radix: Vec<i64>, dist: Vec<u32> },
    /// one relation vector and an infinite quotient
    OneRelation { relation: Vec<i64> },
    Unsupported(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
struct FactorSpec {
    gens: usize,
    relations: Vec<Vec<i64>>,
}

/// `Z^gens / <relations>` written in invariant-factor coordinates, with the
/// images of the standard generators kept for the word metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "FactorSpec", into = "FactorSpec")]
pub struct AbelianFactor {
    pub gens: usize,
    pub relations: Vec<Vec<i64>>,
    pub rank: usize,
    pub torsion: Vec<i64>,
    smith: Smith,
    // SNF rows feeding each output coordinate, and their moduli (0 = free)
    rows: Vec<(usize, i64)>,
    gen_images: Vec<Coords>,
    metric: FactorMetric,
}

impl PartialEq for AbelianFactor {
    fn eq(&self, other: &Self) -> bool {
        self.gens == other.gens && self.relations == other.relations
    }
}
impl Eq for AbelianFactor {}

impl From<FactorSpec> for AbelianFactor {
    fn from(s: FactorSpec) -> Self {
        AbelianFactor::new(s.gens, s.relations)
    }
}
impl From<AbelianFactor> for FactorSpec {
    fn from(f: AbelianFactor) -> Self {
        FactorSpec { gens: f.gens, relations: f.relations }
    }
}

impl AbelianFactor {
    pub fn free(rank: usize) -> Self {
        Self::new(rank, Vec::new())
    }

    pub fn cyclic(n: i64) -> Self {
        Self::new(1, vec![vec![n]])
    }

    pub fn new(gens: usize, relations: Vec<Vec<i64>>) -> Self {
        let relations: Vec<Vec<i64>> = relations.into_iter().filter(|r| r.iter().any(|&x| x != 0)).collect();
        let smith = smith(gens, &relations);
        let r = smith.invariants.len();
        let mut rows = Vec::new();
        for i in r..gens {
            rows.push((i, 0));
        }
        let mut torsion = Vec::new();
        for (i, &d) in smith.invariants.iter().enumerate() {
            if d >= 2 {
                rows.push((i, d));
                torsion.push(d);
            }
        }
        let mut f = AbelianFactor {
            gens,
            relations,
            rank: gens - r,
            torsion,
            smith,
            rows,
            gen_images: Vec::new(),
            metric: FactorMetric::Free,
        };
        f.gen_images = (0..gens)
            .map(|j| {
                let mut e = vec![0; gens];
                e[j] = 1;
                f.project(&e)
            })
            .collect();
        f.metric = f.build_metric();
        f
    }

    fn build_metric(&self) -> FactorMetric {
        if self.relations.is_empty() {
            return FactorMetric::Free;
        }
        if self.rank == 0 {
            let order: i64 = self.torsion.iter().product();
            if order as usize > TABLE_CAP {
                return FactorMetric::Unsupported(format!("finite factor of order {order}"));
            }
            let radix = self.torsion.clone();
            let mut dist = vec![u32::MAX; order as usize];
            let zero: Coords = self.torsion.iter().map(|_| 0).collect();
            dist[Self::index_in(&radix, &zero)] = 0;
            let mut queue = VecDeque::from([zero]);
            while let Some(a) = queue.pop_front() {
                let da = dist[Self::index_in(&radix, &a)];
                for g in &self.gen_images {
                    for sign in [1, -1] {
                        let b = self.add_scaled(&a, g, sign);
                        let ib = Self::index_in(&radix, &b);
                        if dist[ib] == u32::MAX {
                            dist[ib] = da + 1;
                            queue.push_back(b);
                        }
                    }
                }
            }
            return FactorMetric::Table { radix, dist };
        }
        let nonzero: Vec<usize> = (0..self.smith.invariants.len()).collect();
        if nonzero.len() == 1 {
            // basis vector of the relation lattice: u_inv * d * e_0
            let d = self.smith.invariants[0];
            let relation: Vec<i64> = (0..self.gens).map(|i| self.smith.u_inv[i][0] * d).collect();
            return FactorMetric::OneRelation { relation };
        }
        FactorMetric::Unsupported(format!(
            "infinite factor with {} independent relations",
            nonzero.len()
        ))
    }

    fn index_in(radix: &[i64], a: &[i64]) -> usize {
        let mut idx = 0usize;
        for (x, d) in a.iter().zip(radix) {
            idx = idx * (*d as usize) + (*x as usize);
        }
        idx
    }

    /// Number of canonical coordinates.
    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.rank == 0
    }

    pub fn order(&self) -> Option<i64> {
        self.is_finite().then(|| self.torsion.iter().product())
    }

    pub fn zero(&self) -> Coords {
        self.rows.iter().map(|_| 0).collect()
    }

    pub fn generator_image(&self, j: usize) -> &Coords {
        &self.gen_images[j]
    }

    /// Image of an exponent vector over the standard generators.
    pub fn project(&self, exps: &[i64]) -> Coords {
        let y = mat_vec(&self.smith.u, exps);
        self.rows.iter().map(|&(i, d)| if d == 0 { y[i] } else { y[i].rem_euclid(d) }).collect()
    }

    /// Some exponent vector mapping to `a`.
    pub fn lift(&self, a: &[i64]) -> Vec<i64> {
        let mut z = vec![0; self.gens];
        for (&(i, _), &x) in self.rows.iter().zip(a) {
            z[i] = x;
        }
        mat_vec(&self.smith.u_inv, &z)
    }

    pub fn reduce(&self, a: &mut Coords) {
        for (x, &(_, d)) in a.iter_mut().zip(&self.rows) {
            if d != 0 {
                *x = x.rem_euclid(d);
            }
        }
    }

    pub fn add(&self, a: &[i64], b: &[i64]) -> Coords {
        self.add_scaled(a, b, 1)
    }

    pub fn add_scaled(&self, a: &[i64], b: &[i64], s: i64) -> Coords {
        let mut c: Coords = a.iter().zip(b).map(|(x, y)| x + s * y).collect();
        self.reduce(&mut c);
        c
    }

    pub fn neg(&self, a: &[i64]) -> Coords {
        let mut c: Coords = a.iter().map(|x| -x).collect();
        self.reduce(&mut c);
        c
    }

    pub fn sub(&self, a: &[i64], b: &[i64]) -> Coords {
        self.add_scaled(a, b, -1)
    }

    pub fn is_zero(a: &[i64]) -> bool {
        a.iter().all(|&x| x == 0)
    }

    /// Word length over the standard generators.
    pub fn word_length(&self, a: &[i64]) -> Result<u64> {
        match &self.metric {
            FactorMetric::Free => Ok(self.lift(a).iter().map(|x| x.unsigned_abs()).sum()),
            FactorMetric::Table { radix, dist } => Ok(dist[Self::index_in(radix, a)] as u64),
            FactorMetric::OneRelation { relation } => {
                let v = self.lift(a);
                let cost = |t: i64| -> u64 { v.iter().zip(relation).map(|(x, l)| (x + t * l).unsigned_abs()).sum() };
                let mut best = cost(0);
                for (x, l) in v.iter().zip(relation) {
                    if *l != 0 {
                        let t = (-x).div_euclid(*l);
                        best = best.min(cost(t)).min(cost(t + 1));
                    }
                }
                Ok(best)
            }
            FactorMetric::Unsupported(msg) => Err(LabError::UnsupportedKernel(msg.clone())),
        }
    }

    pub fn metric_supported(&self) -> bool {
        !matches!(self.metric, FactorMetric::Unsupported(_))
    }

    /// Distance between two elements in the Cayley graph of the factor.
    pub fn distance(&self, a: &[i64], b: &[i64]) -> Result<u64> {
        self.word_length(&self.sub(b, a))
    }

    /// All elements of word length at most `r`, sorted.
    pub fn ball(&self, r: u64) -> Vec<Coords> {
        if let FactorMetric::Table { radix, dist } = &self.metric {
            let mut out = Vec::new();
            for (idx, &d) in dist.iter().enumerate() {
                if d as u64 <= r {
                    let mut a: Coords = SmallVec::from_elem(0, radix.len());
                    let mut rest = idx;
                    for (k, &m) in radix.iter().enumerate().rev() {
                        a[k] = (rest % m as usize) as i64;
                        rest /= m as usize;
                    }
                    out.push(a);
                }
            }
            out.sort();
            return out;
        }
        let mut seen: FxHashSet<Coords> = FxHashSet::default();
        let mut exps = vec![0i64; self.gens];
        fn rec(f: &AbelianFactor, j: usize, left: i64, exps: &mut Vec<i64>, seen: &mut FxHashSet<Coords>) {
            if j == f.gens {
                seen.insert(f.project(exps));
                return;
            }
            for e in -left..=left {
                exps[j] = e;
                rec(f, j + 1, left - e.abs(), exps, seen);
            }
            exps[j] = 0;
        }
        rec(self, 0, r as i64, &mut exps, &mut seen);
        let mut out: Vec<Coords> = seen.into_iter().collect();
        out.sort();
        out
    }

    /// Short human-readable form of an element as generator exponents.
    pub fn describe(&self, a: &[i64]) -> String {
        format!("{:?}", self.lift(a))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Syllable {
    pub factor: u16,
    pub elem: Coords,
}

/// Reduced syllable normal form; the identity has no syllables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct GroupElement {
    pub syllables: SmallVec<[Syllable; 4]>,
}

impl GroupElement {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        self.syllables.is_empty()
    }

    pub fn syllable_len(&self) -> usize {
        self.syllables.len()
    }

    pub fn last_factor(&self) -> Option<usize> {
        self.syllables.last().map(|s| s.factor as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    pub name: String,
    pub factor: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupContext {
    pub name: String,
    pub factors: Vec<AbelianFactor>,
    pub peripheral: Vec<usize>,
    pub generators: Vec<Generator>,
}

/// A word as a list of (generator symbol, exponent).
pub type Word = Vec<(String, i64)>;

impl GroupContext {
    /// Checked constructor; peripheral indices must be nonempty and distinct.
    pub fn new(name: &str, factors: Vec<AbelianFactor>, names: Vec<Vec<String>>, peripheral: Vec<usize>) -> Result<Self> {
        if peripheral.is_empty() {
            return Err(LabError::Parse { key: "peripheral".into(), msg: "at least one peripheral factor required".into() });
        }
        Self::build(name, factors, names, peripheral)
    }

    /// A free product with no peripheral structure; its cusped space is the
    /// Cayley graph.
    pub fn without_peripherals(name: &str, factors: Vec<AbelianFactor>, names: Vec<Vec<String>>) -> Result<Self> {
        Self::build(name, factors, names, Vec::new())
    }

    fn build(name: &str, factors: Vec<AbelianFactor>, names: Vec<Vec<String>>, mut peripheral: Vec<usize>) -> Result<Self> {
        if names.len() != factors.len() {
            return Err(LabError::Parse { key: "factor".into(), msg: "one name list per factor".into() });
        }
        let mut generators = Vec::new();
        let mut seen = FxHashSet::default();
        for (fi, (f, ns)) in factors.iter().zip(&names).enumerate() {
            if ns.len() != f.gens {
                return Err(LabError::Parse {
                    key: "factor".into(),
                    msg: format!("factor {fi} has {} generators but {} names", f.gens, ns.len()),
                });
            }
            for (j, n) in ns.iter().enumerate() {
                if !seen.insert(n.clone()) {
                    return Err(LabError::Parse { key: "factor".into(), msg: format!("generator `{n}` repeated") });
                }
                generators.push(Generator { name: n.clone(), factor: fi, index: j });
            }
        }
        let before = peripheral.len();
        peripheral.sort_unstable();
        peripheral.dedup();
        if peripheral.len() != before {
            return Err(LabError::Parse { key: "peripheral".into(), msg: "peripheral indices repeated".into() });
        }
        if let Some(&bad) = peripheral.iter().find(|&&i| i >= factors.len()) {
            return Err(LabError::Parse { key: "peripheral".into(), msg: format!("no factor {bad}") });
        }
        Ok(GroupContext { name: name.to_string(), factors, peripheral, generators })
    }

    pub fn is_peripheral(&self, i: usize) -> bool {
        self.peripheral.contains(&i)
    }

    pub fn factor(&self, i: usize) -> &AbelianFactor {
        &self.factors[i]
    }

    pub fn generator(&self, name: &str) -> Result<&Generator> {
        self.generators.iter().find(|g| g.name == name).ok_or_else(|| LabError::UnknownGenerator(name.to_string()))
    }

    /// Syllable element for `g^e`.
    pub fn syllable_power(&self, g: &Generator, e: i64) -> GroupElement {
        let f = &self.factors[g.factor];
        let mut exps = vec![0; f.gens];
        exps[g.index] = e;
        self.from_factor(g.factor, f.project(&exps))
    }

    pub fn from_factor(&self, factor: usize, elem: Coords) -> GroupElement {
        let mut out = GroupElement::identity();
        if !AbelianFactor::is_zero(&elem) {
            out.syllables.push(Syllable { factor: factor as u16, elem });
        }
        out
    }

    fn push(&self, acc: &mut GroupElement, s: &Syllable) {
        if AbelianFactor::is_zero(&s.elem) {
            return;
        }
        if let Some(last) = acc.syllables.last_mut() {
            if last.factor == s.factor {
                let sum = self.factors[s.factor as usize].add(&last.elem, &s.elem);
                if AbelianFactor::is_zero(&sum) {
                    acc.syllables.pop();
                } else {
                    last.elem = sum;
                }
                return;
            }
        }
        acc.syllables.push(s.clone());
    }

    pub fn mul(&self, a: &GroupElement, b: &GroupElement) -> GroupElement {
        let mut out = a.clone();
        for s in &b.syllables {
            self.push(&mut out, s);
        }
        out
    }

    pub fn mul_syllable(&self, a: &GroupElement, factor: usize, elem: &[i64]) -> GroupElement {
        let mut out = a.clone();
        self.push(&mut out, &Syllable { factor: factor as u16, elem: elem.iter().copied().collect() });
        out
    }

    pub fn inv(&self, a: &GroupElement) -> GroupElement {
        GroupElement {
            syllables: a
                .syllables
                .iter()
                .rev()
                .map(|s| Syllable { factor: s.factor, elem: self.factors[s.factor as usize].neg(&s.elem) })
                .collect(),
        }
    }

    pub fn conj(&self, g: &GroupElement, h: &GroupElement) -> GroupElement {
        self.mul(&self.mul(g, h), &self.inv(g))
    }

    pub fn pow(&self, a: &GroupElement, e: i64) -> GroupElement {
        let base = if e < 0 { self.inv(a) } else { a.clone() };
        let mut out = GroupElement::identity();
        for _ in 0..e.unsigned_abs() {
            out = self.mul(&out, &base);
        }
        out
    }

    /// Unique syllable normal form of a word.
    pub fn normal_form(&self, word: &[(String, i64)]) -> Result<GroupElement> {
        let mut out = GroupElement::identity();
        for (sym, e) in word {
            let g = self.generator(sym)?;
            let piece = self.syllable_power(g, *e);
            out = self.mul(&out, &piece);
        }
        Ok(out)
    }

    /// Parses `x^8 y x^-8 y^-1`; separators are whitespace, `*` or `.`.
    /// Run-together single-letter symbols such as `xyx` are split.
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        let mut word = Vec::new();
        let chars: Vec<char> = text.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() || c == '*' || c == '.' || c == '·' {
                i += 1;
                continue;
            }
            if c == '1' && (i + 1 == chars.len() || !chars[i + 1].is_ascii_digit()) {
                i += 1;
                continue;
            }
            if !(c.is_alphabetic() || c == '_') {
                return Err(LabError::Parse { key: "word".into(), msg: format!("unexpected `{c}` in `{text}`") });
            }
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let ident: String = chars[start..i].iter().collect();
            let mut exp = 1i64;
            if i < chars.len() && chars[i] == '^' {
                i += 1;
                let s = i;
                if i < chars.len() && (chars[i] == '-' || chars[i] == '+') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let lit: String = chars[s..i].iter().collect();
                exp = lit
                    .parse()
                    .map_err(|_| LabError::Parse { key: "word".into(), msg: format!("bad exponent `{lit}`") })?;
            }
            if self.generator(&ident).is_ok() {
                word.push((ident, exp));
            } else if ident.chars().all(|ch| self.generator(&ch.to_string()).is_ok()) {
                let letters: Vec<char> = ident.chars().collect();
                for (k, ch) in letters.iter().enumerate() {
                    let e = if k + 1 == letters.len() { exp } else { 1 };
                    word.push((ch.to_string(), e));
                }
            } else {
                return Err(LabError::UnknownGenerator(ident));
            }
        }
        Ok(word)
    }

    pub fn element(&self, text: &str) -> Result<GroupElement> {
        let w = self.parse_word(text)?;
        self.normal_form(&w)
    }

    /// Generator images and their inverses, deduplicated, identity removed.
    pub fn cayley_moves(&self) -> Vec<(usize, Coords)> {
        let mut out: Vec<(usize, Coords)> = Vec::new();
        for g in &self.generators {
            let f = &self.factors[g.factor];
            let img = f.generator_image(g.index).clone();
            if AbelianFactor::is_zero(&img) {
                continue;
            }
            for m in [img.clone(), f.neg(&img)] {
                if !out.iter().any(|(fi, e)| *fi == g.factor && *e == m) {
                    out.push((g.factor, m));
                }
            }
        }
        out
    }

    /// Word length of a group element over all generators.
    pub fn word_length(&self, g: &GroupElement) -> Result<u64> {
        let mut total = 0;
        for s in &g.syllables {
            total += self.factors[s.factor as usize].word_length(&s.elem)?;
        }
        Ok(total)
    }

    /// Coset label for `g P_i`: the normal form with a trailing `i`-syllable
    /// removed, together with that syllable's element.
    pub fn split_coset(&self, g: &GroupElement, i: usize) -> (GroupElement, Coords) {
        let mut label = g.clone();
        match label.syllables.last() {
            Some(s) if s.factor as usize == i => {
                let p = label.syllables.pop().unwrap().elem;
                (label, p)
            }
            _ => (label, self.factors[i].zero()),
        }
    }

    pub fn format(&self, g: &GroupElement) -> String {
        if g.is_identity() {
            return "1".into();
        }
        let mut parts = Vec::new();
        for s in &g.syllables {
            let fi = s.factor as usize;
            let exps = self.factors[fi].lift(&s.elem);
            for (j, e) in exps.iter().enumerate() {
                if *e == 0 {
                    continue;
                }
                let name = &self.generators.iter().find(|g| g.factor == fi && g.index == j).unwrap().name;
                if *e == 1 {
                    parts.push(name.clone());
                } else {
                    parts.push(format!("{name}^{e}"));
                }
            }
        }
        parts.join(" ")
    }

    /// Parses the declarative fixture format:
    ///
    /// ```text
    /// name = FIX2
    /// factor = Z^2 : a b
    /// factor = Z : c
    /// peripheral = 0
    /// ```
    pub fn parse_fixture(text: &str) -> Result<Self> {
        let mut name = String::from("custom");
        let mut factors = Vec::new();
        let mut names: Vec<Vec<String>> = Vec::new();
        let mut peripheral = Vec::new();
        let mut next_letter = 0u8;
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LabError::Parse { key: line.to_string(), msg: "expected `key = value`".into() })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "name" => name = value.to_string(),
                "factor" => {
                    let (shape, syms) = match value.split_once(':') {
                        Some((a, b)) => (a.trim(), Some(b.trim())),
                        None => (value, None),
                    };
                    let f = parse_factor_shape(shape)?;
                    let ns: Vec<String> = match syms {
                        Some(s) => s.split_whitespace().map(str::to_string).collect(),
                        None => (0..f.gens)
                            .map(|_| {
                                let c = (b'a' + next_letter % 26) as char;
                                next_letter += 1;
                                c.to_string()
                            })
                            .collect(),
                    };
                    factors.push(f);
                    names.push(ns);
                }
                "peripheral" => {
                    for tok in value.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()) {
                        peripheral.push(tok.parse::<usize>().map_err(|_| LabError::Parse {
                            key: "peripheral".into(),
                            msg: format!("bad index `{tok}`"),
                        })?);
                    }
                }
                "backend" => {
                    if value != "freeprod-abelian" {
                        return Err(LabError::Parse { key: "backend".into(), msg: format!("backend `{value}` not available") });
                    }
                }
                other => return Err(LabError::Parse { key: other.to_string(), msg: "unknown key".into() }),
            }
        }
        if peripheral.is_empty() {
            Self::without_peripherals(&name, factors, names)
        } else {
            Self::new(&name, factors, names, peripheral)
        }
    }

    /// Named fixtures: FIX1 = Z*Z rel first factor, FIX2 = Z^2*Z rel Z^2,
    /// FIX3 = Z^2*Z^2 rel both, TREE = free group of rank 2 without cusps.
    pub fn fixture(id: &str) -> Result<Self> {
        let text = match id.to_ascii_uppercase().as_str() {
            "FIX1" => "name = FIX1\nfactor = Z : x\nfactor = Z : y\nperipheral = 0\n",
            "FIX2" => "name = FIX2\nfactor = Z^2 : a b\nfactor = Z : c\nperipheral = 0\n",
            "FIX3" => "name = FIX3\nfactor = Z^2 : a b\nfactor = Z^2 : c d\nperipheral = 0 1\n",
            "TREE" | "F2" => "name = TREE\nfactor = Z : x\nfactor = Z : y\n",
            _ => return Err(LabError::UnknownFixture(id.to_string())),
        };
        Self::parse_fixture(text)
    }
}

fn parse_factor_shape(shape: &str) -> Result<AbelianFactor> {
    let mut gens = 0;
    let mut relations = Vec::new();
    let mut cyclic: Vec<i64> = Vec::new();
    for part in shape.split('+') {
        let p = part.trim().replace(' ', "");
        let bad = || LabError::Parse { key: "factor".into(), msg: format!("bad factor `{p}`") };
        if p == "Z" {
            cyclic.push(0);
        } else if let Some(k) = p.strip_prefix("Z^") {
            let k: usize = k.parse().map_err(|_| bad())?;
            cyclic.extend(std::iter::repeat(0).take(k));
        } else if let Some(n) = p.strip_prefix("Z/") {
            let n: i64 = n.parse().map_err(|_| bad())?;
            if n < 1 {
                return Err(bad());
            }
            cyclic.push(n);
        } else {
            return Err(bad());
        }
    }
    for (j, &n) in cyclic.iter().enumerate() {
        gens += 1;
        if n != 0 {
            let mut v = vec![0; cyclic.len()];
            v[j] = n;
            relations.push(v);
        }
    }
    Ok(AbelianFactor::new(gens, relations))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuotientKind {
    Finite,
    VirtuallyCyclic,
    Infinite,
}

/// Filling kernels as sublattices of the peripheral factors, in the
/// standard-generator coordinates of each factor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillingSpec {
    pub kernels: BTreeMap<usize, Vec<Vec<i64>>>,
    pub kinds: BTreeMap<usize, QuotientKind>,
}

impl FillingSpec {
    pub fn new(ctx: &GroupContext, kernels: BTreeMap<usize, Vec<Vec<i64>>>) -> Result<Self> {
        let mut kinds = BTreeMap::new();
        for &i in &ctx.peripheral {
            let f = &ctx.factors[i];
            let ks = kernels.get(&i).cloned().unwrap_or_default();
            for v in &ks {
                if v.len() != f.gens {
                    return Err(LabError::KernelOutsideFactor { factor: i, rank: f.gens, vector: v.clone() });
                }
            }
            let q = filled_factor(f, &ks);
            let kind = if q.is_finite() {
                QuotientKind::Finite
            } else if q.rank == 1 {
                QuotientKind::VirtuallyCyclic
            } else {
                QuotientKind::Infinite
            };
            kinds.insert(i, kind);
        }
        for &i in kernels.keys() {
            if !ctx.is_peripheral(i) {
                return Err(LabError::NotPeripheral(i));
            }
        }
        Ok(FillingSpec { kernels, kinds })
    }

    pub fn trivial(ctx: &GroupContext) -> Self {
        Self::new(ctx, BTreeMap::new()).expect("empty filling is always valid")
    }

    /// Slope fillings: `<x^n>` in rank-one peripherals and `<(1, n)>` in
    /// rank-two peripherals.
    pub fn slope(ctx: &GroupContext, n: i64) -> Result<Self> {
        let slopes: Vec<i64> = ctx.peripheral.iter().map(|_| n).collect();
        Self::slopes(ctx, &slopes)
    }

    pub fn slopes(ctx: &GroupContext, ns: &[i64]) -> Result<Self> {
        if ns.len() != ctx.peripheral.len() {
            return Err(LabError::Parse { key: "slope".into(), msg: "one slope per peripheral factor".into() });
        }
        let mut kernels = BTreeMap::new();
        for (&i, &n) in ctx.peripheral.iter().zip(ns) {
            let m = ctx.factors[i].gens;
            let v = match m {
                1 => vec![n],
                _ => {
                    let mut v = vec![0; m];
                    v[0] = 1;
                    v[1] = n;
                    v
                }
            };
            kernels.insert(i, vec![v]);
        }
        Self::new(ctx, kernels)
    }

    pub fn is_trivial(&self) -> bool {
        self.kernels.values().all(|ks| ks.iter().all(|v| v.iter().all(|&x| x == 0)))
    }
}

fn filled_factor(f: &AbelianFactor, kernel: &[Vec<i64>]) -> AbelianFactor {
    let mut rel = f.relations.clone();
    rel.extend(kernel.iter().cloned());
    AbelianFactor::new(f.gens, rel)
}

/// The filled group `G(N_1, ..., N_n)`: peripheral factors replaced by their
/// quotients, everything else unchanged.
pub fn quotient_context(ctx: &GroupContext, spec: &FillingSpec) -> Result<GroupContext> {
    let mut factors = ctx.factors.clone();
    for (&i, ks) in &spec.kernels {
        if !ctx.is_peripheral(i) {
            return Err(LabError::NotPeripheral(i));
        }
        let f = &ctx.factors[i];
        for v in ks {
            if v.len() != f.gens {
                return Err(LabError::KernelOutsideFactor { factor: i, rank: f.gens, vector: v.clone() });
            }
        }
        let q = filled_factor(f, ks);
        if !q.metric_supported() {
            return Err(LabError::UnsupportedKernel(format!("factor {i} quotient")));
        }
        factors[i] = q;
    }
    let suffix = if spec.is_trivial() { String::new() } else { "/K".to_string() };
    Ok(GroupContext {
        name: format!("{}{}", ctx.name, suffix),
        factors,
        peripheral: ctx.peripheral.clone(),
        generators: ctx.generators.clone(),
    })
}

/// The induced map `G -> G/K` between a context and its filling.
#[derive(Debug, Clone)]
pub struct QuotientMap {
    pub base: GroupContext,
    pub target: GroupContext,
}

impl QuotientMap {
    pub fn new(base: &GroupContext, spec: &FillingSpec) -> Result<Self> {
        Ok(QuotientMap { base: base.clone(), target: quotient_context(base, spec)? })
    }

    pub fn factor_image(&self, factor: usize, elem: &[i64]) -> Coords {
        let exps = self.base.factors[factor].lift(elem);
        self.target.factors[factor].project(&exps)
    }

    pub fn image(&self, g: &GroupElement) -> GroupElement {
        let mut out = GroupElement::identity();
        for s in &g.syllables {
            let e = self.factor_image(s.factor as usize, &s.elem);
            self.target.push(&mut out, &Syllable { factor: s.factor, elem: e });
        }
        out
    }
}

pub fn kernel_contains(g: &GroupElement, ctx: &GroupContext, spec: &FillingSpec) -> Result<bool> {
    Ok(QuotientMap::new(ctx, spec)?.image(g).is_identity())
}

/// Shortest nontrivial kernel element, measured in the word metric of its
/// peripheral factor; `None` when no kernel is nontrivial.
pub fn filling_girth(spec: &FillingSpec, ctx: &GroupContext) -> Result<Option<u64>> {
    let mut best: Option<u64> = None;
    for (&i, ks) in &spec.kernels {
        let f = &ctx.factors[i];
        let gens: Vec<Coords> = ks.iter().map(|v| f.project(v)).filter(|c| !AbelianFactor::is_zero(c)).collect();
        if gens.is_empty() {
            continue;
        }
        let candidate = if gens.len() == 1 && f.relations.is_empty() {
            f.word_length(&gens[0])?
        } else {
            shortest_in_subgroup(f, &gens)?
        };
        best = Some(best.map_or(candidate, |b| b.min(candidate)));
    }
    Ok(best)
}

/// Exhaustive over subgroups of finite factors, bounded coefficient search
/// otherwise.
fn shortest_in_subgroup(f: &AbelianFactor, gens: &[Coords]) -> Result<u64> {
    let mut best = u64::MAX;
    if f.is_finite() {
        let mut seen: FxHashSet<Coords> = FxHashSet::default();
        let mut queue = VecDeque::from([f.zero()]);
        seen.insert(f.zero());
        while let Some(a) = queue.pop_front() {
            if !AbelianFactor::is_zero(&a) {
                best = best.min(f.word_length(&a)?);
            }
            for g in gens {
                for s in [1, -1] {
                    let b = f.add_scaled(&a, g, s);
                    if seen.insert(b.clone()) {
                        queue.push_back(b);
                    }
                }
            }
        }
        return Ok(best);
    }
    let bound: i64 = if gens.len() <= 2 { 12 } else { 3 };
    let mut coeffs = vec![-bound; gens.len()];
    loop {
        let mut a = f.zero();
        for (c, g) in coeffs.iter().zip(gens) {
            a = f.add_scaled(&a, g, *c);
        }
        if !AbelianFactor::is_zero(&a) {
            best = best.min(f.word_length(&a)?);
        }
        let mut k = 0;
        loop {
            if k == coeffs.len() {
                return Ok(best);
            }
            coeffs[k] += 1;
            if coeffs[k] > bound {
                coeffs[k] = -bound;
                k += 1;
            } else {
                break;
            }
        }
    }
}

/// Canonical label of the left coset `g P_i`.
pub fn peripheral_coset_id(ctx: &GroupContext, g: &GroupElement, i: usize) -> Result<GroupElement> {
    if !ctx.is_peripheral(i) {
        return Err(LabError::NotPeripheral(i));
    }
    Ok(ctx.split_coset(g, i).0)
}

impl fmt::Display for QuotientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            QuotientKind::Finite => "finite",
            QuotientKind::VirtuallyCyclic => "virtually-cyclic",
            QuotientKind::Infinite => "infinite",
        };
        f.write_str(s)
    }
}

/// Elements within word distance `radius` of the identity, sorted.
pub fn enumerate_ball(ctx: &GroupContext, radius: u32) -> Vec<GroupElement> {
    let moves = ctx.cayley_moves();
    let mut seen: FxHashMap<GroupElement, u32> = FxHashMap::default();
    let mut queue = VecDeque::from([GroupElement::identity()]);
    seen.insert(GroupElement::identity(), 0);
    while let Some(g) = queue.pop_front() {
        let d = seen[&g];
        if d == radius {
            continue;
        }
        for (fi, m) in &moves {
            let h = ctx.mul_syllable(&g, *fi, m);
            if !seen.contains_key(&h) {
                seen.insert(h.clone(), d + 1);
                queue.push_back(h);
            }
        }
    }
    let mut out: Vec<GroupElement> = seen.into_keys().collect();
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fix1() -> GroupContext {
        GroupContext::fixture("FIX1").unwrap()
    }

    #[test]
    fn inverse_cancels() {
        let ctx = fix1();
        assert!(ctx.element("x x^-1").unwrap().is_identity());
        assert_eq!(ctx.element("x y x").unwrap().syllable_len(), 3);
    }

    #[test]
    fn abelian_addition_in_one_factor() {
        let ctx = GroupContext::fixture("FIX2").unwrap();
        let g = ctx.element("a b").unwrap();
        assert_eq!(g.syllable_len(), 1);
        assert_eq!(g.syllables[0].elem.as_slice(), &[1, 1]);
    }

    #[test]
    fn slope_quotients() {
        let ctx = fix1();
        let spec = FillingSpec::slope(&ctx, 8).unwrap();
        let q = quotient_context(&ctx, &spec).unwrap();
        assert_eq!(q.factors[0].torsion, vec![8]);
        assert_eq!(q.factors[0].rank, 0);
        assert_eq!(q.factors[1].rank, 1);

        let ctx3 = GroupContext::fixture("FIX3").unwrap();
        let q3 = quotient_context(&ctx3, &FillingSpec::slope(&ctx3, 5).unwrap()).unwrap();
        assert!(q3.factors.iter().all(|f| f.rank == 1 && f.torsion.is_empty()));
        // generators a, b map to -5 and 1
        let f = &q3.factors[0];
        assert_eq!(f.word_length(&f.project(&[1, 5])).unwrap(), 0);
        assert_eq!(f.word_length(f.generator_image(0)).unwrap(), 1);
    }

    #[test]
    fn whole_factor_collapses() {
        let ctx = fix1();
        let spec = FillingSpec::new(&ctx, BTreeMap::from([(0, vec![vec![1]])])).unwrap();
        let q = quotient_context(&ctx, &spec).unwrap();
        assert!(q.factors[0].is_trivial());
        let map = QuotientMap::new(&ctx, &spec).unwrap();
        let g = ctx.element("y x^3 y").unwrap();
        assert_eq!(map.image(&g), q.element("y^2").unwrap());
    }

    #[test]
    fn kernel_membership() {
        let ctx = fix1();
        let spec = FillingSpec::slope(&ctx, 8).unwrap();
        assert!(kernel_contains(&ctx.element("x^8").unwrap(), &ctx, &spec).unwrap());
        assert!(!kernel_contains(&ctx.element("y").unwrap(), &ctx, &spec).unwrap());
        assert!(!kernel_contains(&ctx.element("x^4").unwrap(), &ctx, &spec).unwrap());
        assert!(kernel_contains(&ctx.element("y x^8 y^-1 x^-16").unwrap(), &ctx, &spec).unwrap());
    }

    #[test]
    fn girths() {
        let ctx = fix1();
        assert_eq!(filling_girth(&FillingSpec::slope(&ctx, 8).unwrap(), &ctx).unwrap(), Some(8));
        assert_eq!(filling_girth(&FillingSpec::trivial(&ctx), &ctx).unwrap(), None);
        let ctx2 = GroupContext::fixture("FIX2").unwrap();
        assert_eq!(filling_girth(&FillingSpec::slope(&ctx2, 6).unwrap(), &ctx2).unwrap(), Some(7));
    }

    #[test]
    fn coset_labels() {
        let ctx = fix1();
        let id = |w: &str| peripheral_coset_id(&ctx, &ctx.element(w).unwrap(), 0).unwrap();
        assert!(id("x^3").is_identity());
        assert_eq!(id("y x^2"), ctx.element("y").unwrap());
        assert_eq!(id("y x y"), ctx.element("y x y").unwrap());
    }

    #[test]
    fn unknown_generator_is_rejected() {
        let ctx = fix1();
        assert_eq!(ctx.element("z").unwrap_err(), LabError::UnknownGenerator("z".into()));
        assert_eq!(ctx.parse_word("xyx").unwrap().len(), 3);
    }

    #[test]
    fn mixed_factor_shape() {
        let ctx = GroupContext::parse_fixture("factor = Z/6+Z : s t\nfactor = Z : u\nperipheral = 0").unwrap();
        let f = &ctx.factors[0];
        assert_eq!((f.rank, f.torsion.clone()), (1, vec![6]));
        assert!(ctx.element("s^6").unwrap().is_identity());
        assert_eq!(f.word_length(&f.project(&[5, 0])).unwrap(), 1);
    }

    #[test]
    fn one_relation_metric_matches_search() {
        // Z^2 / <(1, 4)>: generators map to -4 and 1
        let f = AbelianFactor::new(2, vec![vec![1, 4]]);
        for target in -20i64..=20 {
            let a = f.project(&[0, target]);
            let mut best = u64::MAX;
            for i in -30i64..=30 {
                for j in -30i64..=30 {
                    if f.project(&[i, j]) == a {
                        best = best.min(i.unsigned_abs() + j.unsigned_abs());
                    }
                }
            }
            assert_eq!(f.word_length(&a).unwrap(), best, "target {target}");
        }
    }
}
