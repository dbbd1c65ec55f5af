//! Weighted context-free grammars in Chomsky normal form.
//!
//! A grammar is a list of rules `A -> B C @ w` or `A -> 'a' @ w` plus a
//! `start: S` declaration. Weights are per-variable stochastic: the
//! outgoing weights of every variable sum to one, so a grammar doubles as
//! a generative process. [`CnfGrammar::recognize`] is the weighted CYK
//! dynamic program summing the weight of every derivation tree of a
//! string; the stack-machine side lives in [`crate::pda`].

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: not in Chomsky normal form: {message}")]
    CnfViolation { line: usize, message: String },
    #[error("line {line}: start symbol {variable} may not appear on a right-hand side")]
    StartOnRhs { line: usize, variable: String },
    #[error("line {line}: second start declaration")]
    DuplicateStart { line: usize },
    #[error("missing `start:` declaration")]
    MissingStart,
    #[error("variable {variable} is used but has no rules")]
    NoRules { variable: String },
    #[error("line {line}: duplicate rule")]
    DuplicateRule { line: usize },
    #[error("line {line}: rule weight {weight} must lie in (0, 1]")]
    BadWeight { line: usize, weight: f64 },
    #[error("outgoing weights of {variable} sum to {sum}, expected 1")]
    WeightSum { variable: String, sum: f64 },
    #[error("variable {variable} derives no terminal string")]
    Unproductive { variable: String },
    #[error("string contains {0:?}, which is not a terminal of this grammar")]
    UnknownTerminal(char),
}

/// Right-hand side of a CNF rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RuleBody {
    Terminal(char),
    /// Two variables, first derived first.
    Pair(usize, usize),
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub lhs: usize,
    pub body: RuleBody,
    pub weight: f64,
}

/// A validated weighted CNF grammar.
#[derive(Debug, Clone)]
pub struct CnfGrammar {
    names: Vec<String>,
    start: usize,
    rules: Vec<Rule>,
    by_variable: Vec<Vec<usize>>,
    terminals: Vec<char>,
    min_yield: Vec<usize>,
}

impl CnfGrammar {
    /// Parse and validate the text format: one rule per line
    /// (`A -> B C @ 0.5`, `A -> 'a' @ 0.5`, bare lowercase terminals also
    /// accepted), `#` comments, one `start: S` declaration, weights as
    /// decimals or fractions.
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut names: Vec<String> = Vec::new();
        let mut index: BTreeMap<String, usize> = BTreeMap::new();
        let mut intern = |name: &str, names: &mut Vec<String>| -> usize {
            if let Some(&i) = index.get(name) {
                return i;
            }
            let i = names.len();
            names.push(name.to_string());
            index.insert(name.to_string(), i);
            i
        };

        let mut start: Option<(usize, usize)> = None; // (variable, line)
        let mut raw_rules: Vec<(usize, Rule)> = Vec::new(); // (line, rule)

        for (line_idx, raw_line) in text.lines().enumerate() {
            let line_no = line_idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: &str| GrammarError::Syntax {
                line: line_no,
                message: message.to_string(),
            };

            if let Some(rest) = line.strip_prefix("start:") {
                if start.is_some() {
                    return Err(GrammarError::DuplicateStart { line: line_no });
                }
                let name = rest.trim();
                if !is_variable_name(name) {
                    return Err(syntax("start symbol must be a variable name"));
                }
                start = Some((intern(name, &mut names), line_no));
                continue;
            }

            let (lhs_text, rest) = line
                .split_once("->")
                .ok_or_else(|| syntax("expected `A -> ... @ weight`"))?;
            let (rhs_text, weight_text) = rest
                .split_once('@')
                .ok_or_else(|| syntax("missing `@ weight`"))?;
            let lhs_name = lhs_text.trim();
            if !is_variable_name(lhs_name) {
                return Err(syntax("left-hand side must be a variable name"));
            }
            let lhs = intern(lhs_name, &mut names);
            let weight = parse_weight(weight_text.trim())
                .ok_or_else(|| syntax("weight must be a decimal or a fraction like 1/3"))?;
            if !(weight > 0.0 && weight <= 1.0 + 1e-12) {
                return Err(GrammarError::BadWeight { line: line_no, weight });
            }

            let tokens: Vec<&str> = rhs_text.split_whitespace().collect();
            let body = match tokens.as_slice() {
                [] => return Err(syntax("empty right-hand side")),
                [one] => match classify(one) {
                    Some(Token::Terminal(c)) => RuleBody::Terminal(c),
                    Some(Token::Variable) => {
                        return Err(GrammarError::CnfViolation {
                            line: line_no,
                            message: format!("unit rule {lhs_name} -> {one}"),
                        })
                    }
                    None => return Err(syntax("unrecognized right-hand side token")),
                },
                [a, b] => match (classify(a), classify(b)) {
                    (Some(Token::Variable), Some(Token::Variable)) => {
                        RuleBody::Pair(intern(a, &mut names), intern(b, &mut names))
                    }
                    (Some(_), Some(_)) => {
                        return Err(GrammarError::CnfViolation {
                            line: line_no,
                            message: "pair rules must name two variables".to_string(),
                        })
                    }
                    _ => return Err(syntax("unrecognized right-hand side token")),
                },
                more => {
                    return Err(GrammarError::CnfViolation {
                        line: line_no,
                        message: format!("{} symbols on the right-hand side", more.len()),
                    })
                }
            };
            raw_rules.push((line_no, Rule { lhs, body, weight }));
        }

        let (start, _) = start.ok_or(GrammarError::MissingStart)?;

        // Structural validation.
        let mut seen: BTreeMap<(usize, RuleBody), usize> = BTreeMap::new();
        for (line, rule) in &raw_rules {
            if let Some(_prev) = seen.insert((rule.lhs, rule.body), *line) {
                return Err(GrammarError::DuplicateRule { line: *line });
            }
            if let RuleBody::Pair(b, c) = rule.body {
                for v in [b, c] {
                    if v == start {
                        return Err(GrammarError::StartOnRhs {
                            line: *line,
                            variable: names[start].clone(),
                        });
                    }
                }
            }
        }

        let n = names.len();
        let mut by_variable = vec![Vec::new(); n];
        let rules: Vec<Rule> = raw_rules.into_iter().map(|(_, r)| r).collect();
        for (i, rule) in rules.iter().enumerate() {
            by_variable[rule.lhs].push(i);
        }
        for (v, indices) in by_variable.iter().enumerate() {
            if indices.is_empty() {
                return Err(GrammarError::NoRules { variable: names[v].clone() });
            }
            let sum: f64 = indices.iter().map(|&i| rules[i].weight).sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(GrammarError::WeightSum { variable: names[v].clone(), sum });
            }
        }

        // Productivity: least fixpoint of minimal derived-string lengths.
        let mut min_yield = vec![usize::MAX; n];
        loop {
            let mut changed = false;
            for rule in &rules {
                let candidate = match rule.body {
                    RuleBody::Terminal(_) => 1,
                    RuleBody::Pair(b, c) => min_yield[b].saturating_add(min_yield[c]),
                };
                if candidate < min_yield[rule.lhs] {
                    min_yield[rule.lhs] = candidate;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if let Some(v) = (0..n).find(|&v| min_yield[v] == usize::MAX) {
            return Err(GrammarError::Unproductive { variable: names[v].clone() });
        }

        let mut terminals: Vec<char> = rules
            .iter()
            .filter_map(|r| match r.body {
                RuleBody::Terminal(c) => Some(c),
                _ => None,
            })
            .collect();
        terminals.sort_unstable();
        terminals.dedup();

        Ok(Self { names, start, rules, by_variable, terminals, min_yield })
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn n_variables(&self) -> usize {
        self.names.len()
    }

    pub fn variable_name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rules_for(&self, v: usize) -> impl Iterator<Item = &Rule> + '_ {
        self.by_variable[v].iter().map(|&i| &self.rules[i])
    }

    pub fn terminals(&self) -> &[char] {
        &self.terminals
    }

    /// Length of the shortest terminal string derivable from `v`.
    pub fn min_yield(&self, v: usize) -> usize {
        self.min_yield[v]
    }

    /// Total weight of the string: Σ over derivation trees of Π rule
    /// weights (weighted CYK). Zero iff the string is not in the language.
    pub fn recognize(&self, string: &str) -> Result<f64, GrammarError> {
        let chars: Vec<char> = string.chars().collect();
        for &c in &chars {
            if !self.terminals.contains(&c) {
                return Err(GrammarError::UnknownTerminal(c));
            }
        }
        let n = chars.len();
        if n == 0 {
            return Ok(0.0); // CNF derives no empty string
        }
        let nv = self.names.len();
        // chart[len-1][i][v] = weight of deriving chars[i .. i+len] from v.
        let mut chart: Vec<Vec<Vec<f64>>> = Vec::with_capacity(n);
        let mut unit = vec![vec![0.0; nv]; n];
        for (i, &c) in chars.iter().enumerate() {
            for rule in &self.rules {
                if rule.body == RuleBody::Terminal(c) {
                    unit[i][rule.lhs] += rule.weight;
                }
            }
        }
        chart.push(unit);
        for len in 2..=n {
            let mut layer = vec![vec![0.0; nv]; n - len + 1];
            for (i, row) in layer.iter_mut().enumerate() {
                for rule in &self.rules {
                    if let RuleBody::Pair(b, c) = rule.body {
                        let mut total = 0.0;
                        for k in 1..len {
                            total += chart[k - 1][i][b] * chart[len - k - 1][i + k][c];
                        }
                        row[rule.lhs] += rule.weight * total;
                    }
                }
            }
            chart.push(layer);
        }
        Ok(chart[n - 1][0][self.start])
    }
}

impl fmt::Display for CnfGrammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "start: {}", self.names[self.start])?;
        for rule in &self.rules {
            match rule.body {
                RuleBody::Terminal(c) => {
                    writeln!(f, "{} -> '{}' @ {}", self.names[rule.lhs], c, rule.weight)?
                }
                RuleBody::Pair(b, c) => writeln!(
                    f,
                    "{} -> {} {} @ {}",
                    self.names[rule.lhs], self.names[b], self.names[c], rule.weight
                )?,
            }
        }
        Ok(())
    }
}

enum Token {
    Terminal(char),
    Variable,
}

fn is_variable_name(token: &str) -> bool {
    let mut chars = token.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn classify(token: &str) -> Option<Token> {
    let chars: Vec<char> = token.chars().collect();
    match chars.as_slice() {
        ['\'', c, '\''] => Some(Token::Terminal(*c)),
        [c] if c.is_ascii_lowercase() || c.is_ascii_digit() => Some(Token::Terminal(*c)),
        _ if is_variable_name(token) => Some(Token::Variable),
        _ => None,
    }
}

fn parse_weight(text: &str) -> Option<f64> {
    if let Some((num, den)) = text.split_once('/') {
        let num: f64 = num.trim().parse().ok()?;
        let den: f64 = den.trim().parse().ok()?;
        if den == 0.0 {
            return None;
        }
        return Some(num / den);
    }
    text.parse().ok()
}

/// Bundled grammars.
pub mod fixtures {
    /// Spin-1 Motzkin walk strings over u/d/f, uniform walk measure.
    pub const MOTZKIN1: &str = include_str!("../fixtures/motzkin1.cnf");
    /// Equal numbers of 0's and 1's.
    pub const BALANCED01: &str = include_str!("../fixtures/balanced01.cnf");
    /// Qutrit cat language: equal 0/1 counts or equal 0/2 counts.
    pub const CAT3: &str = include_str!("../fixtures/cat3.cnf");
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;
    use std::collections::HashMap;

    /// Brute-force weighted language: all strings of exactly `len`
    /// derivable from `var`, with their total derivation weight.
    pub fn exact_language(
        grammar: &CnfGrammar,
        var: usize,
        len: usize,
        memo: &mut HashMap<(usize, usize), HashMap<String, f64>>,
    ) -> HashMap<String, f64> {
        if let Some(hit) = memo.get(&(var, len)) {
            return hit.clone();
        }
        let mut out: HashMap<String, f64> = HashMap::new();
        for rule in grammar.rules_for(var) {
            match rule.body {
                RuleBody::Terminal(c) => {
                    if len == 1 {
                        *out.entry(c.to_string()).or_insert(0.0) += rule.weight;
                    }
                }
                RuleBody::Pair(b, c) => {
                    for k in 1..len {
                        let left = exact_language(grammar, b, k, memo);
                        if left.is_empty() {
                            continue;
                        }
                        let right = exact_language(grammar, c, len - k, memo);
                        for (ls, lw) in &left {
                            for (rs, rw) in &right {
                                *out.entry(format!("{ls}{rs}")).or_insert(0.0) +=
                                    rule.weight * lw * rw;
                            }
                        }
                    }
                }
            }
        }
        memo.insert((var, len), out.clone());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::collections::HashMap;

    fn all_strings(alphabet: &[char], len: usize) -> Vec<String> {
        let mut out = vec![String::new()];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|s| {
                    alphabet.iter().map(move |&c| {
                        let mut t = s.clone();
                        t.push(c);
                        t
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn single_rule_grammar() {
        let g = CnfGrammar::parse("start: S\nS -> a @ 1.0\n").unwrap();
        assert_eq!(g.rules().len(), 1);
        assert_relative_eq!(g.recognize("a").unwrap(), 1.0);
        assert_eq!(g.recognize("aa").unwrap(), 0.0);
        assert!(matches!(g.recognize("b"), Err(GrammarError::UnknownTerminal('b'))));
    }

    #[test]
    fn parse_rejects_malformed_input() {
        assert!(matches!(
            CnfGrammar::parse("start: S\nS -> A B C @ 1.0\nA -> a @ 1\nB -> b @ 1\nC -> c @ 1\n"),
            Err(GrammarError::CnfViolation { line: 2, .. })
        ));
        assert!(matches!(
            CnfGrammar::parse("start: S\nS -> A @ 1.0\nA -> a @ 1\n"),
            Err(GrammarError::CnfViolation { line: 2, .. })
        ));
        assert!(matches!(
            CnfGrammar::parse("start: S\nS -> A S @ 1.0\nA -> a @ 1\n"),
            Err(GrammarError::StartOnRhs { line: 2, .. })
        ));
        assert!(matches!(
            CnfGrammar::parse("S -> a @ 1.0\n"),
            Err(GrammarError::MissingStart)
        ));
        assert!(matches!(
            CnfGrammar::parse("start: S\nstart: S\nS -> a @ 1\n"),
            Err(GrammarError::DuplicateStart { line: 2 })
        ));
        assert!(matches!(
            CnfGrammar::parse("start: S\nS -> a @ 0.5\nS -> a @ 0.5\n"),
            Err(GrammarError::DuplicateRule { line: 3 })
        ));
        assert!(matches!(
            CnfGrammar::parse("start: S\nS -> a @ 0.7\nS -> b @ 0.7\n"),
            Err(GrammarError::WeightSum { .. })
        ));
        assert!(matches!(
            CnfGrammar::parse("start: S\nS -> a @ -0.5\nS -> b @ 1.5\n"),
            Err(GrammarError::BadWeight { line: 2, .. })
        ));
        assert!(matches!(
            CnfGrammar::parse("start: S\nS -> A B @ 1.0\nA -> a @ 1\n"),
            Err(GrammarError::NoRules { .. })
        ));
        // B can only grow, never finishing a string.
        assert!(matches!(
            CnfGrammar::parse("start: S\nS -> B A @ 1.0\nA -> a @ 1\nB -> B B @ 1.0\n"),
            Err(GrammarError::Unproductive { .. })
        ));
        assert!(matches!(
            CnfGrammar::parse("start: S\nS => a @ 1.0\n"),
            Err(GrammarError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            CnfGrammar::parse("start: S\nS -> a @ one\n"),
            Err(GrammarError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn recognize_sums_over_derivation_trees() {
        // Two parse trees for "aaa", each of weight 0.5⁵.
        let g = CnfGrammar::parse(
            "start: S\nS -> A A @ 0.5\nS -> a @ 0.5\nA -> A A @ 0.5\nA -> a @ 0.5\n",
        )
        .unwrap();
        assert_relative_eq!(g.recognize("aaa").unwrap(), 0.0625, epsilon = 1e-15);
        // Brute-force oracle agreement for every length.
        let mut memo = HashMap::new();
        for len in 1..=6 {
            let lang = oracle::exact_language(&g, g.start(), len, &mut memo);
            for s in all_strings(&['a'], len) {
                let expected = lang.get(&s).copied().unwrap_or(0.0);
                assert_relative_eq!(g.recognize(&s).unwrap(), expected, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn fixtures_parse_and_min_yields_are_sane() {
        for text in [fixtures::MOTZKIN1, fixtures::BALANCED01, fixtures::CAT3] {
            let g = CnfGrammar::parse(text).unwrap();
            assert!(g.min_yield(g.start()) >= 1);
        }
        let g = CnfGrammar::parse(fixtures::MOTZKIN1).unwrap();
        assert_eq!(g.terminals(), &['d', 'f', 'u']);
        let idx = |name: &str| {
            (0..g.n_variables()).find(|&v| g.variable_name(v) == name).unwrap()
        };
        assert_eq!(g.min_yield(idx("S")), 1);
        assert_eq!(g.min_yield(idx("R")), 1);
        assert_eq!(g.min_yield(idx("T")), 2);
        assert_eq!(g.min_yield(idx("C")), 1);
    }

    #[test]
    fn fixtures_match_brute_force_language() {
        for text in [fixtures::MOTZKIN1, fixtures::BALANCED01, fixtures::CAT3] {
            let g = CnfGrammar::parse(text).unwrap();
            let mut memo = HashMap::new();
            for len in 1..=6 {
                let lang = oracle::exact_language(&g, g.start(), len, &mut memo);
                for s in all_strings(g.terminals(), len) {
                    let expected = lang.get(&s).copied().unwrap_or(0.0);
                    assert_relative_eq!(
                        g.recognize(&s).unwrap(),
                        expected,
                        epsilon = 1e-13,
                        max_relative = 1e-10
                    );
                }
            }
        }
    }

    #[test]
    fn balanced_fixture_matches_counting_oracle() {
        let g = CnfGrammar::parse(fixtures::BALANCED01).unwrap();
        for len in 1..=8 {
            for s in all_strings(&['0', '1'], len) {
                let zeros = s.chars().filter(|&c| c == '0').count();
                let ones = len - zeros;
                let w = g.recognize(&s).unwrap();
                assert_eq!(w > 0.0, zeros == ones, "string {s}");
            }
        }
    }

    #[test]
    fn cat_fixture_matches_counting_oracle() {
        let g = CnfGrammar::parse(fixtures::CAT3).unwrap();
        for len in 1..=6 {
            for s in all_strings(&['0', '1', '2'], len) {
                let count = |t: char| s.chars().filter(|&c| c == t).count();
                let member = count('0') == count('1') || count('0') == count('2');
                let w = g.recognize(&s).unwrap();
                assert_eq!(w > 0.0, member, "string {s}");
            }
        }
    }

    #[test]
    fn motzkin_fixture_matches_walk_oracle() {
        let g = CnfGrammar::parse(fixtures::MOTZKIN1).unwrap();
        let ens = crate::motzkin::MotzkinEnsemble::uniform_spin1();
        // Every legal walk string is recognized; every other u/d/f string
        // is not. Encoded u = +1, d = −1, f = 0.
        for n in 1..=8usize {
            for walk in crate::motzkin::enumerate_walks(n, 1).unwrap() {
                let s: String = walk
                    .iter()
                    .map(|&x| match x {
                        1 => 'u',
                        -1 => 'd',
                        _ => 'f',
                    })
                    .collect();
                assert!(g.recognize(&s).unwrap() > 0.0, "unrecognized walk {s}");
            }
        }
        for len in 1..=6 {
            for s in all_strings(&['u', 'd', 'f'], len) {
                let decoded: Vec<i64> = s
                    .chars()
                    .map(|c| match c {
                        'u' => 1,
                        'd' => -1,
                        _ => 0,
                    })
                    .collect();
                let legal = ens.path_weight(&decoded).unwrap() > 0.0;
                assert_eq!(g.recognize(&s).unwrap() > 0.0, legal, "string {s}");
            }
        }
    }

    #[test]
    fn comments_fractions_and_quotes_are_parsed() {
        let g = CnfGrammar::parse(
            "# leading comment\nstart: S # trailing\nS -> 'x' @ 1/3\nS -> A A @ 2/3\nA -> 'x' @ 1\n",
        )
        .unwrap();
        assert_eq!(g.terminals(), &['x']);
        let w: f64 = g.rules_for(g.start()).map(|r| r.weight).sum();
        assert_relative_eq!(w, 1.0, epsilon = 1e-15);
        assert_relative_eq!(g.recognize("xx").unwrap(), 2.0 / 3.0, epsilon = 1e-15);
    }
}
