//! Inside-outside dynamic programming over a PCFG in Chomsky normal form.
//!
//! The inside recursion's per-span update is a contraction of the
//! binary-rule tensor R[a][b][c] = Pr[a -> b c] against split products,
//! the triple-sum shape that motivates cycle rank; [`inside_factored`]
//! runs the same update through an exactly cycle-factored rule tensor.
//!
//! Grammar text format: lines `BIN a b c p`, `LEX a word p`, `ROOT a`;
//! `#` starts a comment.

use crate::error::{CoreError, Result};
use crate::factors::{pair_to_col, CycleFactors};
use std::collections::HashMap;

#[derive(Clone, Debug)]
pub struct BinaryRule {
    pub parent: usize,
    pub left: usize,
    pub right: usize,
    pub prob: f64,
}

#[derive(Clone, Debug)]
pub struct LexicalRule {
    pub parent: usize,
    pub word: String,
    pub prob: f64,
}

/// CNF grammar; every nonterminal's rule probabilities must sum to one.
#[derive(Clone, Debug)]
pub struct Grammar {
    names: Vec<String>,
    binary: Vec<BinaryRule>,
    lexical: Vec<LexicalRule>,
    root: usize,
    by_parent: Vec<Vec<(usize, usize, f64)>>,
    lex_by_word: HashMap<String, Vec<(usize, f64)>>,
}

impl Grammar {
    pub fn new(
        names: Vec<String>,
        binary: Vec<BinaryRule>,
        lexical: Vec<LexicalRule>,
        root: usize,
    ) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(CoreError::Grammar("grammar has no nonterminals".into()));
        }
        if root >= n {
            return Err(CoreError::Grammar(format!("root index {} out of range", root)));
        }
        let mut mass = vec![0.0f64; n];
        for r in &binary {
            if r.parent >= n || r.left >= n || r.right >= n {
                return Err(CoreError::Grammar("binary rule symbol out of range".into()));
            }
            if !(0.0..=1.0).contains(&r.prob) {
                return Err(CoreError::Grammar(format!(
                    "rule probability {} for {} outside [0, 1]",
                    r.prob, names[r.parent]
                )));
            }
            mass[r.parent] += r.prob;
        }
        for r in &lexical {
            if r.parent >= n {
                return Err(CoreError::Grammar("lexical rule symbol out of range".into()));
            }
            if !(0.0..=1.0).contains(&r.prob) {
                return Err(CoreError::Grammar(format!(
                    "rule probability {} for {} outside [0, 1]",
                    r.prob, names[r.parent]
                )));
            }
            mass[r.parent] += r.prob;
        }
        for (a, &m) in mass.iter().enumerate() {
            if (m - 1.0).abs() > 1e-9 {
                return Err(CoreError::Grammar(format!(
                    "rules of nonterminal {} sum to {} instead of 1",
                    names[a], m
                )));
            }
        }
        let mut by_parent = vec![Vec::new(); n];
        for r in &binary {
            by_parent[r.parent].push((r.left, r.right, r.prob));
        }
        let mut lex_by_word: HashMap<String, Vec<(usize, f64)>> = HashMap::new();
        for r in &lexical {
            lex_by_word.entry(r.word.clone()).or_default().push((r.parent, r.prob));
        }
        Ok(Grammar { names, binary, lexical, root, by_parent, lex_by_word })
    }

    pub fn parse_text(src: &str) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut intern = |name: &str, names: &mut Vec<String>| -> usize {
            if let Some(&i) = index.get(name) {
                return i;
            }
            let i = names.len();
            names.push(name.to_string());
            index.insert(name.to_string(), i);
            i
        };
        let mut binary = Vec::new();
        let mut lexical = Vec::new();
        let mut root = None;
        for (lineno, raw) in src.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let fail = |msg: String| CoreError::Parse { line: lineno + 1, msg };
            match toks[0] {
                "BIN" => {
                    if toks.len() != 5 {
                        return Err(fail("BIN needs: BIN a b c p".into()));
                    }
                    let parent = intern(toks[1], &mut names);
                    let left = intern(toks[2], &mut names);
                    let right = intern(toks[3], &mut names);
                    let prob: f64 = toks[4]
                        .parse()
                        .map_err(|_| fail(format!("bad probability `{}`", toks[4])))?;
                    binary.push(BinaryRule { parent, left, right, prob });
                }
                "LEX" => {
                    if toks.len() != 4 {
                        return Err(fail("LEX needs: LEX a word p".into()));
                    }
                    let parent = intern(toks[1], &mut names);
                    let prob: f64 = toks[3]
                        .parse()
                        .map_err(|_| fail(format!("bad probability `{}`", toks[3])))?;
                    lexical.push(LexicalRule { parent, word: toks[2].to_string(), prob });
                }
                "ROOT" => {
                    if toks.len() != 2 {
                        return Err(fail("ROOT needs: ROOT a".into()));
                    }
                    root = Some(intern(toks[1], &mut names));
                }
                other => return Err(fail(format!("unknown directive `{}`", other))),
            }
        }
        let root = root.ok_or_else(|| CoreError::Grammar("missing ROOT line".into()))?;
        Grammar::new(names, binary, lexical, root)
    }

    pub fn num_nonterminals(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, a: usize) -> &str {
        &self.names[a]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn binary_rules(&self) -> &[BinaryRule] {
        &self.binary
    }

    pub fn lexical_rules(&self) -> &[LexicalRule] {
        &self.lexical
    }

    pub fn rules_of(&self, parent: usize) -> &[(usize, usize, f64)] {
        &self.by_parent[parent]
    }

    pub fn lexical_prob(&self, parent: usize, word: &str) -> f64 {
        self.lex_by_word
            .get(word)
            .map(|v| {
                v.iter().filter(|(p, _)| *p == parent).fold(0.0, |acc, (_, pr)| acc + pr)
            })
            .unwrap_or(0.0)
    }

    /// The binary-rule tensor R[a][b][c] = Pr[a -> b c], densified.
    pub fn rule_tensor(&self) -> crate::dense::DenseTensor {
        let n = self.names.len();
        let mut t = crate::dense::DenseTensor::zeros(&[n, n, n]);
        for r in &self.binary {
            t.add_at3(r.parent, r.left, r.right, r.prob);
        }
        t
    }
}

/// Span-indexed probability chart: cells (i, j, a) with 0 <= i <= j < L.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartTable {
    len: usize,
    syms: usize,
    values: Vec<f64>,
}

impl ChartTable {
    pub fn zeros(len: usize, syms: usize) -> Self {
        ChartTable { len, syms, values: vec![0.0; len * len * syms] }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn syms(&self) -> usize {
        self.syms
    }

    pub fn get(&self, i: usize, j: usize, a: usize) -> f64 {
        self.values[(i * self.len + j) * self.syms + a]
    }

    pub fn set(&mut self, i: usize, j: usize, a: usize, v: f64) {
        self.values[(i * self.len + j) * self.syms + a] = v;
    }
}

fn check_sentence(words: &[String]) -> Result<()> {
    if words.is_empty() {
        return Err(CoreError::InvalidArgument("empty sentence".into()));
    }
    Ok(())
}

/// Inside probabilities: p_in(i, j, a) = Pr[a derives words i..=j].
pub fn inside(g: &Grammar, words: &[String]) -> Result<ChartTable> {
    check_sentence(words)?;
    let (l, syms) = (words.len(), g.num_nonterminals());
    let mut chart = ChartTable::zeros(l, syms);
    for (i, w) in words.iter().enumerate() {
        for a in 0..syms {
            chart.set(i, i, a, g.lexical_prob(a, w));
        }
    }
    for span in 2..=l {
        for i in 0..=l - span {
            let j = i + span - 1;
            for a in 0..syms {
                let mut acc = 0.0;
                for &(b, c, p) in g.rules_of(a) {
                    for m in i..j {
                        acc += chart.get(i, m, b) * chart.get(m + 1, j, c) * p;
                    }
                }
                chart.set(i, j, a, acc);
            }
        }
    }
    Ok(chart)
}

/// Outside probabilities with base p_out(0, L-1, root) = 1.
pub fn outside(g: &Grammar, words: &[String], p_in: &ChartTable) -> Result<ChartTable> {
    check_sentence(words)?;
    let (l, syms) = (words.len(), g.num_nonterminals());
    if p_in.len() != l || p_in.syms() != syms {
        return Err(CoreError::DimensionMismatch(format!(
            "inside chart {}x{} vs sentence {}/{} nonterminals",
            p_in.len(),
            p_in.syms(),
            l,
            syms
        )));
    }
    let mut chart = ChartTable::zeros(l, syms);
    chart.set(0, l - 1, g.root(), 1.0);
    for span in (1..l).rev() {
        for i in 0..=l - span {
            let j = i + span - 1;
            for a in 0..syms {
                let mut acc = 0.0;
                // a is the right child of b spanning (m, j): b -> c a
                for b in 0..syms {
                    for &(c, right, p) in g.rules_of(b) {
                        if right != a {
                            continue;
                        }
                        for m in 0..i {
                            acc += p_in.get(m, i - 1, c) * chart.get(m, j, b) * p;
                        }
                    }
                }
                // a is the left child of b spanning (i, m): b -> a c
                for b in 0..syms {
                    for &(left, c, p) in g.rules_of(b) {
                        if left != a {
                            continue;
                        }
                        for m in j + 1..l {
                            acc += p_in.get(j + 1, m, c) * chart.get(i, m, b) * p;
                        }
                    }
                }
                chart.set(i, j, a, acc);
            }
        }
    }
    Ok(chart)
}

/// Span marginals mu(i, j, a) = p_in * p_out.
pub fn marginals(p_in: &ChartTable, p_out: &ChartTable) -> Result<ChartTable> {
    if p_in.len() != p_out.len() || p_in.syms() != p_out.syms() {
        return Err(CoreError::DimensionMismatch("inside/outside chart shapes differ".into()));
    }
    let (l, syms) = (p_in.len(), p_in.syms());
    let mut chart = ChartTable::zeros(l, syms);
    for i in 0..l {
        for j in i..l {
            for a in 0..syms {
                chart.set(i, j, a, p_in.get(i, j, a) * p_out.get(i, j, a));
            }
        }
    }
    Ok(chart)
}

/// Inside pass with the binary-rule contraction routed through cycle
/// factors of the rule tensor. When `cycle_reconstruct(factors)` equals
/// the grammar's rule tensor exactly, the chart matches [`inside`].
pub fn inside_factored(
    g: &Grammar,
    factors: &CycleFactors,
    words: &[String],
) -> Result<ChartTable> {
    check_sentence(words)?;
    let (l, syms) = (words.len(), g.num_nonterminals());
    if factors.n != syms {
        return Err(CoreError::DimensionMismatch(format!(
            "factors n = {} vs {} nonterminals",
            factors.n, syms
        )));
    }
    let k = factors.k;
    let mut chart = ChartTable::zeros(l, syms);
    for (i, w) in words.iter().enumerate() {
        for a in 0..syms {
            chart.set(i, i, a, g.lexical_prob(a, w));
        }
    }
    for span in 2..=l {
        for i in 0..=l - span {
            let j = i + span - 1;
            // split products S[b][c] = sum over m of in(i,m,b) in(m+1,j,c)
            let mut split = vec![0.0f64; syms * syms];
            for b in 0..syms {
                for m in i..j {
                    let left = chart.get(i, m, b);
                    if left == 0.0 {
                        continue;
                    }
                    for c in 0..syms {
                        split[b * syms + c] += left * chart.get(m + 1, j, c);
                    }
                }
            }
            // contract S against the factored rule tensor:
            // in(a) = sum_{al,be,ga} U[a, al+k*be] V[b, be+k*ga] W[c, ga+k*al] S[b][c]
            let mut t1 = vec![0.0f64; k * k * syms]; // (ga, al, b)
            for ga in 0..k {
                for al in 0..k {
                    let wc = pair_to_col(ga, al, k);
                    for b in 0..syms {
                        let mut acc = 0.0;
                        for c in 0..syms {
                            acc += factors.w[(c, wc)] * split[b * syms + c];
                        }
                        t1[(ga * k + al) * syms + b] = acc;
                    }
                }
            }
            let mut t2 = vec![0.0f64; k * k]; // (be, al) summed over ga
            for be in 0..k {
                for al in 0..k {
                    let mut acc = 0.0;
                    for ga in 0..k {
                        let vc = pair_to_col(be, ga, k);
                        for b in 0..syms {
                            acc += factors.v[(b, vc)] * t1[(ga * k + al) * syms + b];
                        }
                    }
                    t2[be * k + al] = acc;
                }
            }
            for a in 0..syms {
                let mut acc = 0.0;
                for al in 0..k {
                    for be in 0..k {
                        acc += factors.u[(a, pair_to_col(al, be, k))] * t2[be * k + al];
                    }
                }
                chart.set(i, j, a, acc);
            }
        }
    }
    Ok(chart)
}
