//! Reader and writer for Cassandra's `.POMDP` text format.
//!
//! Supported: `discount`, `values: reward`, `states`/`actions`/`observations`
//! as counts or name lists, every `start` form, and all `T:`/`O:`/`R:` entry
//! shapes (single entry, row, matrix, `uniform`, `identity`) with `*`
//! wildcards. Later entries overwrite earlier ones, as in the reference
//! parser. Raw rewards `R(a, s, s', o)` become part of the signal: the set of
//! distinct values with positive probability is collected and mapped
//! affinely into [0, 1].

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use super::{ModelError, ModelParts, PomdpModel, SignalKernel, STOCHASTIC_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardNormalization {
    /// Keep rewards that already lie in [0, 1]; otherwise min-max scale.
    #[default]
    Auto,
    /// Always map the smallest value to 0 and the largest to 1.
    MinMax,
    /// Reject files whose rewards leave [0, 1].
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub normalization: RewardNormalization,
    /// Maximum number of distinct reward values.
    pub reward_cap: usize,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            normalization: RewardNormalization::Auto,
            reward_cap: 64,
        }
    }
}

pub fn load_pomdp(path: impl AsRef<Path>, options: LoadOptions) -> Result<PomdpModel, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_pomdp(&text, options)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Colon,
    Word(String),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let mut chars = line.char_indices().peekable();
        while let Some(&(i, c)) = chars.peek() {
            if c.is_whitespace() {
                chars.next();
            } else if c == ':' {
                out.push(Token {
                    tok: Tok::Colon,
                    line: ln + 1,
                    column: i + 1,
                });
                chars.next();
            } else {
                let start = i;
                let mut end = i;
                while let Some(&(j, d)) = chars.peek() {
                    if d.is_whitespace() || d == ':' {
                        break;
                    }
                    end = j + d.len_utf8();
                    chars.next();
                }
                out.push(Token {
                    tok: Tok::Word(line[start..end].to_string()),
                    line: ln + 1,
                    column: start + 1,
                });
            }
        }
    }
    out
}

const KEYWORDS: [&str; 9] = [
    "discount",
    "values",
    "states",
    "actions",
    "observations",
    "start",
    "T",
    "O",
    "R",
];

/// Which entries a `*`-capable reference selects.
#[derive(Debug, Clone, Copy)]
enum Sel {
    All,
    One(usize),
}

impl Sel {
    fn indices(self, n: usize) -> std::ops::Range<usize> {
        match self {
            Sel::All => 0..n,
            Sel::One(i) => i..i + 1,
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    last_line: usize,
}

impl Parser {
    fn err_at(&self, tok: Option<&Token>, message: impl Into<String>) -> ModelError {
        let (line, column) = tok.map_or((self.last_line, 1), |t| (t.line, t.column));
        ModelError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn err(&self, message: impl Into<String>) -> ModelError {
        self.err_at(self.toks.get(self.pos), message)
    }

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_word(&self) -> Option<&str> {
        match self.peek() {
            Some(Token {
                tok: Tok::Word(w), ..
            }) => Some(w.as_str()),
            _ => None,
        }
    }

    fn at_statement_start(&self) -> bool {
        let Some(w) = self.peek_word() else {
            return false;
        };
        if !KEYWORDS.contains(&w) {
            return false;
        }
        match self.toks.get(self.pos + 1).map(|t| &t.tok) {
            Some(Tok::Colon) => true,
            Some(Tok::Word(next)) => w == "start" && (next == "include" || next == "exclude"),
            None => false,
        }
    }

    fn expect_colon(&mut self) -> Result<(), ModelError> {
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Colon) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err("expected ':'")),
        }
    }

    fn next_is_colon(&self) -> bool {
        matches!(self.peek().map(|t| &t.tok), Some(Tok::Colon))
    }

    fn word(&mut self) -> Result<String, ModelError> {
        match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Word(w)) => {
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.err("expected a word")),
        }
    }

    fn number(&mut self) -> Result<f64, ModelError> {
        let tok = self.peek().cloned();
        let w = self.word()?;
        w.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| self.err_at(tok.as_ref(), format!("expected a number, found '{w}'")))
    }

    fn numbers(&mut self, count: usize) -> Result<Vec<f64>, ModelError> {
        (0..count).map(|_| self.number()).collect()
    }

    /// Words until the next statement keyword.
    fn word_list(&mut self) -> Result<Vec<String>, ModelError> {
        let mut out = Vec::new();
        while self.peek().is_some() && !self.at_statement_start() {
            out.push(self.word()?);
        }
        Ok(out)
    }

    fn reference(&mut self, names: &[String], what: &str) -> Result<Sel, ModelError> {
        let tok = self.peek().cloned();
        let w = self.word()?;
        if w == "*" {
            return Ok(Sel::All);
        }
        if let Some(i) = names.iter().position(|n| *n == w) {
            return Ok(Sel::One(i));
        }
        match w.parse::<usize>() {
            Ok(i) if i < names.len() => Ok(Sel::One(i)),
            _ => Err(self.err_at(tok.as_ref(), format!("unknown {what} '{w}'"))),
        }
    }
}

fn names_from(list: Vec<String>) -> Vec<String> {
    if list.len() == 1 {
        if let Ok(k) = list[0].parse::<usize>() {
            return (0..k).map(|i| i.to_string()).collect();
        }
    }
    list
}

struct Raw {
    discount: Option<f64>,
    states: Vec<String>,
    actions: Vec<String>,
    observations: Vec<String>,
    start: Option<Vec<f64>>,
    /// `[a][s][s']`
    t: Vec<Vec<Vec<f64>>>,
    /// `[a][s'][o]`
    o: Vec<Vec<Vec<f64>>>,
    /// `[a][s][s'][o]`
    r: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Raw {
    fn allocate(&mut self) {
        let (n, na, no) = (self.states.len(), self.actions.len(), self.observations.len());
        if self.t.is_empty() {
            self.t = vec![vec![vec![0.0; n]; n]; na];
            self.o = vec![vec![vec![0.0; no]; n]; na];
            self.r = vec![vec![vec![vec![0.0; no]; n]; n]; na];
        }
    }
}

pub fn parse_pomdp(text: &str, options: LoadOptions) -> Result<PomdpModel, ModelError> {
    let toks = tokenize(text);
    let last_line = toks.last().map_or(1, |t| t.line);
    let mut p = Parser {
        toks,
        pos: 0,
        last_line,
    };
    let mut raw = Raw {
        discount: None,
        states: Vec::new(),
        actions: Vec::new(),
        observations: Vec::new(),
        start: None,
        t: Vec::new(),
        o: Vec::new(),
        r: Vec::new(),
    };

    while p.peek().is_some() {
        if !p.at_statement_start() {
            return Err(p.err("expected a statement keyword"));
        }
        let kw_tok = p.peek().cloned();
        let kw = p.word()?;
        match kw.as_str() {
            "discount" => {
                p.expect_colon()?;
                raw.discount = Some(p.number()?);
            }
            "values" => {
                p.expect_colon()?;
                let v = p.word()?;
                match v.as_str() {
                    "reward" => {}
                    "cost" => {
                        return Err(ModelError::Unsupported(
                            "'values: cost' (costs are not supported; negate them into rewards)"
                                .into(),
                        ))
                    }
                    other => return Err(p.err_at(kw_tok.as_ref(), format!("unknown values kind '{other}'"))),
                }
            }
            "states" | "actions" | "observations" => {
                p.expect_colon()?;
                if !raw.t.is_empty() {
                    return Err(p.err_at(kw_tok.as_ref(), format!("'{kw}' declared after model entries")));
                }
                let list = names_from(p.word_list()?);
                if list.is_empty() {
                    return Err(p.err_at(kw_tok.as_ref(), format!("'{kw}' is empty")));
                }
                let mut seen = BTreeSet::new();
                if let Some(dup) = list.iter().find(|w| !seen.insert(w.as_str())) {
                    return Err(p.err_at(kw_tok.as_ref(), format!("duplicate name '{dup}' in '{kw}'")));
                }
                match kw.as_str() {
                    "states" => raw.states = list,
                    "actions" => raw.actions = list,
                    _ => raw.observations = list,
                }
            }
            "start" => parse_start(&mut p, &mut raw)?,
            "T" | "O" | "R" => {
                if raw.states.is_empty() || raw.actions.is_empty() || raw.observations.is_empty() {
                    return Err(p.err_at(
                        kw_tok.as_ref(),
                        "states, actions and observations must be declared before entries",
                    ));
                }
                raw.allocate();
                p.expect_colon()?;
                match kw.as_str() {
                    "T" => parse_t(&mut p, &mut raw)?,
                    "O" => parse_o(&mut p, &mut raw)?,
                    _ => parse_r(&mut p, &mut raw)?,
                }
            }
            _ => unreachable!(),
        }
    }

    build_model(raw, options, &p)
}

fn parse_start(p: &mut Parser, raw: &mut Raw) -> Result<(), ModelError> {
    let n = raw.states.len();
    if n == 0 {
        return Err(p.err("'start' must follow 'states'"));
    }
    let mode = if p.next_is_colon() {
        None
    } else {
        Some(p.word()?)
    };
    p.expect_colon()?;
    match mode.as_deref() {
        Some(m @ ("include" | "exclude")) => {
            let list = p.word_list()?;
            let mut chosen = vec![m == "exclude"; n];
            for w in list {
                let i = match p_lookup(&raw.states, &w) {
                    Some(i) => i,
                    None => return Err(p.err(format!("unknown state '{w}' in start {m}"))),
                };
                chosen[i] = m == "include";
            }
            let k = chosen.iter().filter(|c| **c).count();
            if k == 0 {
                return Err(p.err("start set is empty"));
            }
            raw.start = Some(
                chosen
                    .iter()
                    .map(|&c| if c { 1.0 / k as f64 } else { 0.0 })
                    .collect(),
            );
        }
        Some(_) => unreachable!(),
        None => {
            let list = p.word_list()?;
            if list.len() == 1 && list[0] == "uniform" {
                raw.start = Some(vec![1.0 / n as f64; n]);
            } else if list.len() == n && list.iter().all(|w| w.parse::<f64>().is_ok()) {
                raw.start = Some(list.iter().map(|w| w.parse().unwrap()).collect());
            } else if list.len() == 1 {
                let Some(i) = p_lookup(&raw.states, &list[0]) else {
                    return Err(p.err(format!("bad start specification '{}'", list[0])));
                };
                let mut v = vec![0.0; n];
                v[i] = 1.0;
                raw.start = Some(v);
            } else {
                return Err(p.err(format!(
                    "start belief needs {n} probabilities, found {} entries",
                    list.len()
                )));
            }
        }
    }
    Ok(())
}

fn p_lookup(names: &[String], w: &str) -> Option<usize> {
    names
        .iter()
        .position(|n| n == w)
        .or_else(|| w.parse::<usize>().ok().filter(|i| *i < names.len()))
}

fn parse_t(p: &mut Parser, raw: &mut Raw) -> Result<(), ModelError> {
    let n = raw.states.len();
    let a = p.reference(&raw.actions, "action")?;
    if !p.next_is_colon() {
        // whole matrix
        let values = match p.peek_word() {
            Some("identity") => {
                p.pos += 1;
                (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect()
            }
            Some("uniform") => {
                p.pos += 1;
                vec![1.0 / n as f64; n * n]
            }
            _ => p.numbers(n * n)?,
        };
        for ai in a.indices(raw.actions.len()) {
            for s in 0..n {
                raw.t[ai][s].copy_from_slice(&values[s * n..(s + 1) * n]);
            }
        }
        return Ok(());
    }
    p.expect_colon()?;
    let s = p.reference(&raw.states, "state")?;
    if !p.next_is_colon() {
        let row = match p.peek_word() {
            Some("uniform") => {
                p.pos += 1;
                vec![1.0 / n as f64; n]
            }
            _ => p.numbers(n)?,
        };
        for ai in a.indices(raw.actions.len()) {
            for si in s.indices(n) {
                raw.t[ai][si].copy_from_slice(&row);
            }
        }
        return Ok(());
    }
    p.expect_colon()?;
    let s2 = p.reference(&raw.states, "state")?;
    let v = p.number()?;
    for ai in a.indices(raw.actions.len()) {
        for si in s.indices(n) {
            for sj in s2.indices(n) {
                raw.t[ai][si][sj] = v;
            }
        }
    }
    Ok(())
}

fn parse_o(p: &mut Parser, raw: &mut Raw) -> Result<(), ModelError> {
    let n = raw.states.len();
    let no = raw.observations.len();
    let a = p.reference(&raw.actions, "action")?;
    if !p.next_is_colon() {
        let values = match p.peek_word() {
            Some("uniform") => {
                p.pos += 1;
                vec![1.0 / no as f64; n * no]
            }
            Some("identity") if no == n => {
                p.pos += 1;
                (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect()
            }
            _ => p.numbers(n * no)?,
        };
        for ai in a.indices(raw.actions.len()) {
            for s in 0..n {
                raw.o[ai][s].copy_from_slice(&values[s * no..(s + 1) * no]);
            }
        }
        return Ok(());
    }
    p.expect_colon()?;
    let s2 = p.reference(&raw.states, "state")?;
    if !p.next_is_colon() {
        let row = match p.peek_word() {
            Some("uniform") => {
                p.pos += 1;
                vec![1.0 / no as f64; no]
            }
            _ => p.numbers(no)?,
        };
        for ai in a.indices(raw.actions.len()) {
            for sj in s2.indices(n) {
                raw.o[ai][sj].copy_from_slice(&row);
            }
        }
        return Ok(());
    }
    p.expect_colon()?;
    let o = p.reference(&raw.observations, "observation")?;
    let v = p.number()?;
    for ai in a.indices(raw.actions.len()) {
        for sj in s2.indices(n) {
            for oi in o.indices(no) {
                raw.o[ai][sj][oi] = v;
            }
        }
    }
    Ok(())
}

fn parse_r(p: &mut Parser, raw: &mut Raw) -> Result<(), ModelError> {
    let n = raw.states.len();
    let no = raw.observations.len();
    let a = p.reference(&raw.actions, "action")?;
    p.expect_colon()?;
    let s = p.reference(&raw.states, "state")?;
    if !p.next_is_colon() {
        let values = p.numbers(n * no)?;
        for ai in a.indices(raw.actions.len()) {
            for si in s.indices(n) {
                for sj in 0..n {
                    raw.r[ai][si][sj].copy_from_slice(&values[sj * no..(sj + 1) * no]);
                }
            }
        }
        return Ok(());
    }
    p.expect_colon()?;
    let s2 = p.reference(&raw.states, "state")?;
    if !p.next_is_colon() {
        let row = p.numbers(no)?;
        for ai in a.indices(raw.actions.len()) {
            for si in s.indices(n) {
                for sj in s2.indices(n) {
                    raw.r[ai][si][sj].copy_from_slice(&row);
                }
            }
        }
        return Ok(());
    }
    p.expect_colon()?;
    let o = p.reference(&raw.observations, "observation")?;
    let v = p.number()?;
    for ai in a.indices(raw.actions.len()) {
        for si in s.indices(n) {
            for sj in s2.indices(n) {
                for oi in o.indices(no) {
                    raw.r[ai][si][sj][oi] = v;
                }
            }
        }
    }
    Ok(())
}

fn build_model(raw: Raw, options: LoadOptions, p: &Parser) -> Result<PomdpModel, ModelError> {
    let discount = raw.discount.ok_or_else(|| p.err("missing 'discount'"))?;
    if raw.states.is_empty() || raw.actions.is_empty() || raw.observations.is_empty() {
        return Err(p.err("states, actions and observations must all be declared"));
    }
    let mut raw = raw;
    raw.allocate();
    let (n, na, no) = (raw.states.len(), raw.actions.len(), raw.observations.len());

    for a in 0..na {
        for s in 0..n {
            let sum: f64 = raw.t[a][s].iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(ModelError::TransitionRow {
                    state: raw.states[s].clone(),
                    action: raw.actions[a].clone(),
                    sum,
                });
            }
        }
        for s2 in 0..n {
            let sum: f64 = raw.o[a][s2].iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(ModelError::ObservationRow {
                    state: raw.states[s2].clone(),
                    action: raw.actions[a].clone(),
                    sum,
                });
            }
        }
    }

    // distinct raw rewards that can actually be emitted
    let mut distinct: Vec<f64> = Vec::new();
    for a in 0..na {
        for s in 0..n {
            for s2 in 0..n {
                if raw.t[a][s][s2] <= 0.0 {
                    continue;
                }
                for o in 0..no {
                    if raw.o[a][s2][o] > 0.0 {
                        distinct.push(raw.r[a][s][s2][o]);
                    }
                }
            }
        }
    }
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() > options.reward_cap {
        return Err(ModelError::TooManyRewards {
            count: distinct.len(),
            cap: options.reward_cap,
        });
    }
    let lo = distinct[0];
    let hi = distinct[distinct.len() - 1];
    let in_unit = lo >= 0.0 && hi <= 1.0;
    let (scale, offset) = match options.normalization {
        RewardNormalization::None if !in_unit => {
            return Err(ModelError::RewardRange(if lo < 0.0 { lo } else { hi }))
        }
        RewardNormalization::None => (1.0, 0.0),
        RewardNormalization::Auto if in_unit => (1.0, 0.0),
        RewardNormalization::Auto | RewardNormalization::MinMax => {
            if hi > lo {
                let scale = 1.0 / (hi - lo);
                (scale, -lo * scale)
            } else {
                (1.0, -lo)
            }
        }
    };
    let reward_values: Vec<f64> = distinct
        .iter()
        .map(|r| (r * scale + offset).clamp(0.0, 1.0))
        .collect();
    let nr = reward_values.len();
    let nearest = |x: f64| -> usize {
        match distinct.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i,
            Err(_) => distinct
                .iter()
                .enumerate()
                .min_by(|(_, u), (_, v)| (*u - x).abs().total_cmp(&(*v - x).abs()))
                .map(|(i, _)| i)
                .unwrap(),
        }
    };

    let kernel: Vec<Vec<Vec<Vec<f64>>>> = (0..na)
        .map(|a| {
            (0..n)
                .map(|s| {
                    (0..n)
                        .map(|s2| {
                            let mut row = vec![0.0; no * nr];
                            for o in 0..no {
                                row[o * nr + nearest(raw.r[a][s][s2][o])] += raw.o[a][s2][o];
                            }
                            row
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    PomdpModel::new(ModelParts {
        states: raw.states,
        actions: raw.actions,
        observations: raw.observations,
        reward_values,
        transition: raw.t,
        signal_kernel: SignalKernel::Joint(kernel),
        discount,
        initial_belief: raw.start.unwrap_or_else(|| vec![1.0 / n as f64; n]),
        reward_scale: scale,
        reward_offset: offset,
    })
}

fn write_names(out: &mut String, key: &str, names: &[String]) -> Result<(), ModelError> {
    let numeric = names.iter().enumerate().all(|(i, n)| *n == i.to_string());
    if numeric {
        writeln!(out, "{key}: {}", names.len()).unwrap();
        return Ok(());
    }
    if let Some(bad) = names
        .iter()
        .find(|n| n.is_empty() || n.contains(|c: char| c.is_whitespace() || c == ':' || c == '#') || *n == "*")
    {
        return Err(ModelError::Unsupported(format!("name '{bad}' cannot be written")));
    }
    writeln!(out, "{key}: {}", names.join(" ")).unwrap();
    Ok(())
}

/// Serializes a model back to `.POMDP` text with rewards in the file's
/// original units. Fails when the signal kernel is not expressible as an
/// arrival-state observation kernel plus a deterministic reward table.
pub fn write_pomdp(model: &PomdpModel) -> Result<String, ModelError> {
    let (n, na, no, nr) = (
        model.num_states(),
        model.num_actions(),
        model.num_observations(),
        model.num_rewards(),
    );
    let mut out = String::new();
    writeln!(out, "discount: {}", model.discount()).unwrap();
    writeln!(out, "values: reward").unwrap();
    write_names(&mut out, "states", model.states())?;
    write_names(&mut out, "actions", model.actions())?;
    write_names(&mut out, "observations", model.observations())?;
    let start: Vec<String> = model
        .initial_belief()
        .as_slice()
        .iter()
        .map(|p| p.to_string())
        .collect();
    writeln!(out, "start: {}", start.join(" ")).unwrap();
    writeln!(out).unwrap();

    for a in 0..na {
        for s in 0..n {
            let row: Vec<String> = model.transition_row(s, a).iter().map(|p| p.to_string()).collect();
            writeln!(out, "T: {a} : {s}\n{}", row.join(" ")).unwrap();
        }
    }
    writeln!(out).unwrap();

    let obs_prob = |s: usize, a: usize, s2: usize, o: usize| -> f64 {
        model.signal_row(s, a, s2)[o * nr..(o + 1) * nr].iter().sum()
    };
    for a in 0..na {
        for s2 in 0..n {
            let row: Vec<f64> = (0..no).map(|o| obs_prob(0, a, s2, o)).collect();
            for s in 1..n {
                for (o, &p0) in row.iter().enumerate() {
                    if (obs_prob(s, a, s2, o) - p0).abs() > 1e-12 {
                        return Err(ModelError::Unsupported(
                            "observation probabilities depend on the start state".into(),
                        ));
                    }
                }
            }
            let row: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            writeln!(out, "O: {a} : {s2}\n{}", row.join(" ")).unwrap();
        }
    }
    writeln!(out).unwrap();

    for a in 0..na {
        for s in 0..n {
            for s2 in 0..n {
                for o in 0..no {
                    let slice = &model.signal_row(s, a, s2)[o * nr..(o + 1) * nr];
                    let mut support = slice.iter().enumerate().filter(|(_, p)| **p > 0.0);
                    let Some((k, _)) = support.next() else {
                        continue;
                    };
                    if support.next().is_some() {
                        return Err(ModelError::Unsupported(
                            "reward is not a function of (action, start, end, observation)".into(),
                        ));
                    }
                    let raw = model.denormalize_reward(model.reward_values()[k]);
                    writeln!(out, "R: {a} : {s} : {s2} : {o} {raw}").unwrap();
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn parse(text: &str) -> Result<PomdpModel, ModelError> {
        parse_pomdp(text, LoadOptions::default())
    }

    #[test]
    fn fair_coin_file() {
        let m = parse(corpus::FAIR_COIN_POMDP).unwrap();
        assert_eq!(m.num_states(), 1);
        assert_eq!(m.num_observations(), 2);
        let total: f64 = m.signal_row(0, 0, 0).iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiger_file_shape_and_rewards() {
        let m = parse(corpus::TIGER_POMDP).unwrap();
        assert_eq!((m.num_states(), m.num_actions(), m.num_observations()), (2, 3, 2));
        assert_eq!(m.num_rewards(), 3);
        assert!(m.reward_values().iter().all(|r| (0.0..=1.0).contains(r)));
        // -100, -1, 10 map to 0, 99/110, 1
        assert!((m.reward_values()[1] - 99.0 / 110.0).abs() < 1e-12);
        assert!((m.denormalize_reward(1.0) - 10.0).abs() < 1e-12);
        assert!(!m.is_arrival_only());
    }

    #[test]
    fn leaky_row_names_state_and_action() {
        let text = "discount: 0.9\nvalues: reward\nstates: a b\nactions: go\nobservations: x\n\
                    T: go : a\n0.5 0.4\nT: go : b\n0 1\nO: go\nuniform\n";
        match parse(text) {
            Err(ModelError::TransitionRow { state, action, sum }) => {
                assert_eq!((state.as_str(), action.as_str()), ("a", "go"));
                assert!((sum - 0.9).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cost_values_rejected() {
        let text = "discount: 0.9\nvalues: cost\nstates: 1\nactions: 1\nobservations: 1\n";
        assert!(matches!(parse(text), Err(ModelError::Unsupported(_))));
    }

    #[test]
    fn parse_error_has_position() {
        let text = "discount: 0.9\nvalues: reward\nstates: 2\nactions: 1\nobservations: 1\nT: 0 : 0 : 1 zero\n";
        match parse(text) {
            Err(ModelError::Parse { line, column, .. }) => assert_eq!((line, column), (6, 14)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reward_cap_enforced() {
        let mut text = String::from(
            "discount: 0.9\nvalues: reward\nstates: 1\nactions: 5\nobservations: 1\nT: * : * : * 1\nO: * : * : * 1\n",
        );
        for a in 0..5 {
            text.push_str(&format!("R: {a} : * : * : * {a}\n"));
        }
        let opts = LoadOptions {
            reward_cap: 4,
            ..LoadOptions::default()
        };
        assert!(matches!(
            parse_pomdp(&text, opts),
            Err(ModelError::TooManyRewards { count: 5, cap: 4 })
        ));
        assert_eq!(parse(&text).unwrap().num_rewards(), 5);
    }

    #[test]
    fn start_forms() {
        let head = "discount: 0.5\nvalues: reward\nstates: a b c\nactions: 1\nobservations: 1\n";
        let tail = "T: 0\nidentity\nO: 0\nuniform\n";
        let b = |start: &str| {
            parse(&format!("{head}{start}\n{tail}"))
                .unwrap()
                .initial_belief()
                .as_slice()
                .to_vec()
        };
        assert_eq!(b("start: b"), vec![0.0, 1.0, 0.0]);
        assert_eq!(b("start include: a c"), vec![0.5, 0.0, 0.5]);
        assert_eq!(b("start exclude: a"), vec![0.0, 0.5, 0.5]);
        assert_eq!(b("start: 0.2 0.3 0.5"), vec![0.2, 0.3, 0.5]);
        let u = b("start: uniform");
        assert!(u.iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
    }
}
