//! HOA v1 text for state-based Büchi automata with explicit labels.
//!
//! Two extension headers carry the limit-deterministic structure:
//! `X-nstates: i j ...` lists the N-part, and `X-epsilon-edges: i>j ...` lists
//! ε-jumps. Files without them are read as plain Büchi automata.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::ldba::{LdbaBuilder, StateKind};
use super::nba::{nba_to_ldba, Nba};
use super::{Ldba, DEFAULT_STATE_LIMIT};
use crate::error::{Error, Result};
use crate::logic::{Alphabet, Assignment, AssignmentSet};

pub fn export_hoa(b: &Ldba) -> String {
    let b = b.reachable();
    let ap = b.alphabet();
    let mut s = String::new();
    let _ = writeln!(s, "HOA: v1");
    let _ = writeln!(s, "States: {}", b.num_states());
    let _ = writeln!(s, "Start: {}", b.initial());
    let names: Vec<String> = ap.names().iter().map(|n| format!("\"{n}\"")).collect();
    let _ = writeln!(s, "AP: {} {}", ap.len(), names.join(" "));
    let _ = writeln!(s, "acc-name: Buchi");
    let _ = writeln!(s, "Acceptance: 1 Inf(0)");
    let _ = writeln!(s, "properties: explicit-labels state-acc");
    let ns: Vec<String> = b.n_states().iter().map(|q| q.to_string()).collect();
    let _ = writeln!(s, "X-nstates: {}", ns.join(" "));
    let eps: Vec<String> = (0..b.num_states())
        .flat_map(|q| b.epsilon(q).iter().map(move |t| format!("{q}>{t}")))
        .collect();
    let _ = writeln!(s, "X-epsilon-edges: {}", eps.join(" "));
    let _ = writeln!(s, "--BODY--");
    for q in 0..b.num_states() {
        let acc = if b.is_accepting(q) { " {0}" } else { "" };
        let _ = writeln!(s, "State: {q}{acc}");
        for t in b.successors(q) {
            let _ = writeln!(s, "[{}] {t}", label_expr(&b.guard(q, t)));
        }
    }
    let _ = writeln!(s, "--END--");
    s
}

/// Cube cover of a guard by Shannon expansion.
fn label_expr(g: &AssignmentSet) -> String {
    if g.is_full() {
        return "t".into();
    }
    if g.is_empty() {
        return "f".into();
    }
    let mut cubes = Vec::new();
    cover(g, g.num_props(), 0, 0, &mut Vec::new(), &mut cubes);
    cubes
        .iter()
        .map(|c: &Vec<(usize, bool)>| {
            if c.is_empty() {
                "t".to_string()
            } else {
                c.iter()
                    .map(|&(p, v)| if v { p.to_string() } else { format!("!{p}") })
                    .collect::<Vec<_>>()
                    .join("&")
            }
        })
        .collect::<Vec<_>>()
        .join(" | ")
}

// `fixed`/`values` describe the current cube's constrained bits.
fn cover(
    g: &AssignmentSet,
    n: usize,
    fixed: u32,
    values: u32,
    lits: &mut Vec<(usize, bool)>,
    out: &mut Vec<Vec<(usize, bool)>>,
) {
    let members = |want: bool| {
        (0..1u32 << n)
            .filter(|a| a & fixed == values)
            .all(|a| g.contains(Assignment(a)) == want)
    };
    if members(false) {
        return;
    }
    if members(true) {
        out.push(lits.clone());
        return;
    }
    let p = (0..n).find(|&p| fixed >> p & 1 == 0).expect("non-constant cube has a free bit");
    // skip the split when p is irrelevant within this cube
    let irrelevant = (0..1u32 << n)
        .filter(|a| a & fixed == values && a >> p & 1 == 0)
        .all(|a| g.contains(Assignment(a)) == g.contains(Assignment(a | 1 << p)));
    if irrelevant {
        // fix p to 0 without emitting a literal
        cover(g, n, fixed | 1 << p, values, lits, out);
        return;
    }
    for v in [false, true] {
        lits.push((p, v));
        cover(g, n, fixed | 1 << p, values | (v as u32) << p, lits, out);
        lits.pop();
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Label {
    True,
    False,
    Ap(usize),
    Not(Box<Label>),
    And(Box<Label>, Box<Label>),
    Or(Box<Label>, Box<Label>),
}

impl Label {
    fn eval(&self, a: Assignment) -> bool {
        match self {
            Label::True => true,
            Label::False => false,
            Label::Ap(p) => a.contains(*p),
            Label::Not(x) => !x.eval(a),
            Label::And(x, y) => x.eval(a) && y.eval(a),
            Label::Or(x, y) => x.eval(a) || y.eval(a),
        }
    }
}

struct LabelParser<'a> {
    s: &'a [u8],
    i: usize,
    num_aps: usize,
}

impl LabelParser<'_> {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn or(&mut self) -> Result<Label> {
        let mut l = self.and()?;
        loop {
            self.ws();
            if self.s.get(self.i) == Some(&b'|') {
                self.i += 1;
                l = Label::Or(Box::new(l), Box::new(self.and()?));
            } else {
                return Ok(l);
            }
        }
    }

    fn and(&mut self) -> Result<Label> {
        let mut l = self.atom()?;
        loop {
            self.ws();
            if self.s.get(self.i) == Some(&b'&') {
                self.i += 1;
                l = Label::And(Box::new(l), Box::new(self.atom()?));
            } else {
                return Ok(l);
            }
        }
    }

    fn atom(&mut self) -> Result<Label> {
        self.ws();
        let Some(&c) = self.s.get(self.i) else {
            return Err(Error::MalformedHoa("unexpected end of label".into()));
        };
        self.i += 1;
        match c {
            b't' => Ok(Label::True),
            b'f' => Ok(Label::False),
            b'!' => Ok(Label::Not(Box::new(self.atom()?))),
            b'(' => {
                let l = self.or()?;
                self.ws();
                if self.s.get(self.i) != Some(&b')') {
                    return Err(Error::MalformedHoa("expected `)` in label".into()));
                }
                self.i += 1;
                Ok(l)
            }
            b'0'..=b'9' => {
                let start = self.i - 1;
                while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
                    self.i += 1;
                }
                let n: usize = std::str::from_utf8(&self.s[start..self.i]).unwrap().parse().unwrap();
                if n >= self.num_aps {
                    return Err(Error::MalformedHoa(format!("label refers to AP {n}")));
                }
                Ok(Label::Ap(n))
            }
            other => Err(Error::MalformedHoa(format!("unexpected `{}` in label", other as char))),
        }
    }
}

fn parse_label(text: &str, num_aps: usize) -> Result<Label> {
    let mut p = LabelParser { s: text.as_bytes(), i: 0, num_aps };
    let l = p.or()?;
    p.ws();
    if p.i != p.s.len() {
        return Err(Error::MalformedHoa(format!("trailing input in label `{text}`")));
    }
    Ok(l)
}

fn parse_aps(rest: &str) -> Result<Vec<String>> {
    let rest = rest.trim();
    let (count, mut tail) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
    let count: usize = count.parse().map_err(|_| Error::MalformedHoa("bad AP count".into()))?;
    let mut names = Vec::new();
    loop {
        tail = tail.trim_start();
        if tail.is_empty() {
            break;
        }
        let Some(stripped) = tail.strip_prefix('"') else {
            return Err(Error::MalformedHoa("AP names must be quoted".into()));
        };
        let end = stripped.find('"').ok_or_else(|| Error::MalformedHoa("unterminated AP name".into()))?;
        names.push(stripped[..end].to_string());
        tail = &stripped[end + 1..];
    }
    if names.len() != count {
        return Err(Error::MalformedHoa(format!("AP count {count} does not match {} names", names.len())));
    }
    Ok(names)
}

fn num(s: &str, what: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::MalformedHoa(format!("bad {what} `{}`", s.trim())))
}

pub fn import_hoa(text: &str) -> Result<Ldba> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some("HOA: v1") {
        return Err(Error::MalformedHoa("missing `HOA: v1` header".into()));
    }
    let mut states = None;
    let mut start = None;
    let mut aps = None;
    let mut acceptance = None;
    let mut nstates: Option<Vec<usize>> = None;
    let mut eps: Vec<(usize, usize)> = Vec::new();
    for line in lines.by_ref() {
        if line == "--BODY--" {
            break;
        }
        let (key, rest) = line.split_once(':').ok_or_else(|| Error::MalformedHoa(format!("bad header line `{line}`")))?;
        match key {
            "States" => states = Some(num(rest, "state count")?),
            "Start" => {
                if start.is_some() || rest.contains('&') {
                    return Err(Error::MalformedHoa("exactly one initial state is supported".into()));
                }
                start = Some(num(rest, "start state")?);
            }
            "AP" => aps = Some(parse_aps(rest)?),
            "Acceptance" => acceptance = Some(rest.split_whitespace().collect::<Vec<_>>().join(" ")),
            "acc-name" => {
                let name = rest.trim();
                if name != "Buchi" {
                    return Err(Error::UnsupportedAcceptance(name.to_string()));
                }
            }
            "X-nstates" => nstates = Some(rest.split_whitespace().map(|x| num(x, "state")).collect::<Result<_>>()?),
            "X-epsilon-edges" => {
                for pair in rest.split_whitespace() {
                    let (a, b) = pair.split_once('>').ok_or_else(|| Error::MalformedHoa(format!("bad ε edge `{pair}`")))?;
                    eps.push((num(a, "state")?, num(b, "state")?));
                }
            }
            _ => {}
        }
    }
    let acceptance = acceptance.ok_or_else(|| Error::MalformedHoa("missing Acceptance header".into()))?;
    if acceptance != "1 Inf(0)" {
        return Err(Error::UnsupportedAcceptance(acceptance));
    }
    let n = states.ok_or_else(|| Error::MalformedHoa("missing States header".into()))?;
    let start = start.ok_or_else(|| Error::MalformedHoa("missing Start header".into()))?;
    let alphabet = Alphabet::new(aps.ok_or_else(|| Error::MalformedHoa("missing AP header".into()))?)
        .map_err(|e| Error::MalformedHoa(e.to_string()))?;
    if start >= n {
        return Err(Error::MalformedHoa("start state out of range".into()));
    }

    let k = alphabet.len();
    let mut accepting = vec![false; n];
    let mut edges: Vec<Vec<(AssignmentSet, usize)>> = vec![Vec::new(); n];
    let mut current: Option<usize> = None;
    let mut ended = false;
    for line in lines {
        if line == "--END--" {
            ended = true;
            break;
        }
        if let Some(rest) = line.strip_prefix("State:") {
            let rest = rest.trim();
            let (id, marks) = match rest.find('{') {
                Some(i) => (&rest[..i], Some(&rest[i..])),
                None => (rest, None),
            };
            let id = num(id.split_whitespace().next().unwrap_or(""), "state")?;
            if id >= n {
                return Err(Error::MalformedHoa(format!("state {id} out of range")));
            }
            if let Some(m) = marks {
                let inner = m.trim().trim_start_matches('{').trim_end_matches('}').trim();
                match inner {
                    "0" => accepting[id] = true,
                    "" => {}
                    other => return Err(Error::UnsupportedAcceptance(format!("acceptance set {{{other}}}"))),
                }
            }
            current = Some(id);
            continue;
        }
        let q = current.ok_or_else(|| Error::MalformedHoa("edge before any State".into()))?;
        let rest = line
            .strip_prefix('[')
            .ok_or_else(|| Error::MalformedHoa(format!("implicit labels are not supported: `{line}`")))?;
        let close = rest.find(']').ok_or_else(|| Error::MalformedHoa("unterminated label".into()))?;
        let label = parse_label(&rest[..close], k)?;
        let tail = rest[close + 1..].trim();
        if tail.contains('{') {
            return Err(Error::UnsupportedAcceptance("transition-based acceptance".into()));
        }
        let t = num(tail, "edge target")?;
        if t >= n {
            return Err(Error::MalformedHoa(format!("edge target {t} out of range")));
        }
        let guard = AssignmentSet::from_fn(k, |a| label.eval(a));
        edges[q].push((guard, t));
    }
    if !ended {
        return Err(Error::MalformedHoa("missing --END--".into()));
    }

    let deterministic = (0..n).all(|q| {
        alphabet.assignments().all(|a| edges[q].iter().filter(|(g, _)| g.contains(a)).count() <= 1)
    });
    if nstates.is_none() && !eps.is_empty() {
        return Err(Error::MalformedHoa("ε edges require X-nstates".into()));
    }
    if nstates.is_none() && !deterministic {
        let nba = Nba {
            num_props: k,
            initial: vec![start],
            transitions: edges,
            accepting_sets: vec![accepting],
        };
        return Ok(nba_to_ldba(&nba, &alphabet, DEFAULT_STATE_LIMIT)?.reachable());
    }
    if !deterministic {
        return Err(Error::MalformedHoa("δ must be deterministic in a limit-deterministic file".into()));
    }
    let nset = nstates.unwrap_or_default();
    let mut b = LdbaBuilder::new(alphabet);
    let mut index = HashMap::new();
    for q in 0..n {
        let kind = if nset.contains(&q) { StateKind::N } else { StateKind::D };
        index.insert(q, b.add_state(kind, accepting[q], format!("{q}")));
    }
    for (q, row) in edges.iter().enumerate() {
        for (g, t) in row {
            b.set_all(q, g, *t);
        }
    }
    for (a, t) in eps {
        if a >= n || t >= n {
            return Err(Error::MalformedHoa("ε edge out of range".into()));
        }
        b.add_epsilon(a, t);
    }
    b.finish(start).map_err(Error::MalformedHoa)
}
