//! Gate-level netlist IR and the CAMO-v1 text format.
//!
//! A netlist is a flat list of gates and D flip-flops over named nets. Each
//! gate is identified by the net it drives, each flop by its `q` net. The
//! text format is line oriented:
//!
//! ```text
//! # comment
//! .model fig8
//! .inputs a b c
//! .outputs y
//! .gate OR2 n1 b c
//! .gate AND2 n2 a n1
//! .gate NOT y n2
//! .end
//! ```
//!
//! `CAMO2` and `LUTn` gates are the obfuscated kinds: the apparent netlist
//! records only their position and wiring, never their function.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateKind {
    Not,
    Buf,
    And2,
    Or2,
    Nand2,
    Nor2,
    Xor2,
    Xnor2,
    Mux2,
    Camo2,
    /// Look-up table over `n` inputs, `1 <= n <= 6`.
    Lut(u8),
    Const0,
    Const1,
}

pub const MAX_LUT_INPUTS: u8 = 6;

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Not | GateKind::Buf => 1,
            GateKind::And2
            | GateKind::Or2
            | GateKind::Nand2
            | GateKind::Nor2
            | GateKind::Xor2
            | GateKind::Xnor2
            | GateKind::Camo2 => 2,
            GateKind::Mux2 => 3,
            GateKind::Lut(n) => n as usize,
            GateKind::Const0 | GateKind::Const1 => 0,
        }
    }

    /// True for kinds whose function lives only in a secret.
    pub fn is_obfuscated(self) -> bool {
        matches!(self, GateKind::Camo2 | GateKind::Lut(_))
    }

    /// Boolean function of a plain gate. Returns `None` for obfuscated kinds.
    ///
    /// `MUX2` inputs are `(sel, a, b)`; `sel = 0` selects `a`.
    pub fn eval(self, inputs: &[bool]) -> Option<bool> {
        let v = match self {
            GateKind::Not => !inputs[0],
            GateKind::Buf => inputs[0],
            GateKind::And2 => inputs[0] & inputs[1],
            GateKind::Or2 => inputs[0] | inputs[1],
            GateKind::Nand2 => !(inputs[0] & inputs[1]),
            GateKind::Nor2 => !(inputs[0] | inputs[1]),
            GateKind::Xor2 => inputs[0] ^ inputs[1],
            GateKind::Xnor2 => !(inputs[0] ^ inputs[1]),
            GateKind::Mux2 => {
                if inputs[0] {
                    inputs[2]
                } else {
                    inputs[1]
                }
            }
            GateKind::Const0 => false,
            GateKind::Const1 => true,
            GateKind::Camo2 | GateKind::Lut(_) => return None,
        };
        Some(v)
    }

    pub fn name(self) -> String {
        match self {
            GateKind::Not => "NOT".into(),
            GateKind::Buf => "BUF".into(),
            GateKind::And2 => "AND2".into(),
            GateKind::Or2 => "OR2".into(),
            GateKind::Nand2 => "NAND2".into(),
            GateKind::Nor2 => "NOR2".into(),
            GateKind::Xor2 => "XOR2".into(),
            GateKind::Xnor2 => "XNOR2".into(),
            GateKind::Mux2 => "MUX2".into(),
            GateKind::Camo2 => "CAMO2".into(),
            GateKind::Lut(n) => format!("LUT{n}"),
            GateKind::Const0 => "CONST0".into(),
            GateKind::Const1 => "CONST1".into(),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for GateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kind = match s {
            "NOT" => GateKind::Not,
            "BUF" => GateKind::Buf,
            "AND2" => GateKind::And2,
            "OR2" => GateKind::Or2,
            "NAND2" => GateKind::Nand2,
            "NOR2" => GateKind::Nor2,
            "XOR2" => GateKind::Xor2,
            "XNOR2" => GateKind::Xnor2,
            "MUX2" => GateKind::Mux2,
            "CAMO2" => GateKind::Camo2,
            "CONST0" => GateKind::Const0,
            "CONST1" => GateKind::Const1,
            _ => {
                let n = s
                    .strip_prefix("LUT")
                    .and_then(|n| n.parse::<u8>().ok())
                    .filter(|n| (1..=MAX_LUT_INPUTS).contains(n))
                    .ok_or_else(|| format!("unknown gate kind `{s}`"))?;
                GateKind::Lut(n)
            }
        };
        Ok(kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Gate {
    pub kind: GateKind,
    pub output: String,
    pub inputs: Vec<String>,
}

impl Gate {
    pub fn new(kind: GateKind, output: impl Into<String>, inputs: &[&str]) -> Self {
        Gate {
            kind,
            output: output.into(),
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// A gate is identified by the net it drives.
    pub fn id(&self) -> &str {
        &self.output
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Flop {
    pub q: String,
    pub d: String,
    pub init: bool,
}

impl Flop {
    pub fn id(&self) -> &str {
        &self.q
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Netlist {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub gates: Vec<Gate>,
    pub flops: Vec<Flop>,
}

/// A broken netlist invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("combinational cycle through net `{0}`")]
    CombinationalCycle(String),
    #[error("net `{0}` has more than one driver")]
    DuplicateDriver(String),
    #[error("net `{0}` is read but never driven")]
    UndrivenNet(String),
    #[error("gate `{gate}` of kind {kind} expects {expected} inputs, found {found}")]
    ArityMismatch {
        gate: String,
        kind: GateKind,
        expected: usize,
        found: usize,
    },
    #[error("`{0}` is declared more than once")]
    DuplicateDeclaration(String),
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
}

impl Violation {
    /// Reporting priority when several invariants break at once.
    fn rank(&self) -> u8 {
        match self {
            Violation::CombinationalCycle(_) => 0,
            Violation::DuplicateDriver(_) => 1,
            Violation::UndrivenNet(_) => 2,
            Violation::ArityMismatch { .. } => 3,
            Violation::DuplicateDeclaration(_) => 4,
            Violation::InvalidIdentifier(_) => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] Violation),
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Where a net gets its value from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Input(usize),
    Gate(usize),
    Flop(usize),
}

impl Netlist {
    pub fn gate(&self, id: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.output == id)
    }

    pub fn gate_index(&self, id: &str) -> Option<usize> {
        self.gates.iter().position(|g| g.output == id)
    }

    pub fn flop(&self, id: &str) -> Option<&Flop> {
        self.flops.iter().find(|f| f.q == id)
    }

    pub fn is_combinational(&self) -> bool {
        self.flops.is_empty()
    }

    pub fn has_obfuscated_gates(&self) -> bool {
        self.gates.iter().any(|g| g.kind.is_obfuscated())
    }

    /// Net → driver map. Gate drivers shadow inputs and flops when a net is
    /// multiply driven, which keeps cycle detection meaningful on bad input.
    pub fn drivers(&self) -> HashMap<&str, Driver> {
        let mut map = HashMap::new();
        for (i, net) in self.inputs.iter().enumerate() {
            map.insert(net.as_str(), Driver::Input(i));
        }
        for (i, f) in self.flops.iter().enumerate() {
            map.insert(f.q.as_str(), Driver::Flop(i));
        }
        for (i, g) in self.gates.iter().enumerate() {
            map.insert(g.output.as_str(), Driver::Gate(i));
        }
        map
    }

    /// Every driven net, in declaration order (inputs, flops, gates).
    pub fn driven_nets(&self) -> Vec<&str> {
        self.inputs
            .iter()
            .chain(self.flops.iter().map(|f| &f.q))
            .chain(self.gates.iter().map(|g| &g.output))
            .map(String::as_str)
            .collect()
    }

    pub fn has_net(&self, net: &str) -> bool {
        self.inputs.iter().any(|n| n == net)
            || self.flops.iter().any(|f| f.q == net)
            || self.gates.iter().any(|g| g.output == net)
    }

    /// All invariant violations, most severe first. Empty iff the netlist is
    /// well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();

        let mut idents = self
            .inputs
            .iter()
            .chain(&self.outputs)
            .chain(self.gates.iter().flat_map(|g| g.inputs.iter().chain([&g.output])))
            .chain(self.flops.iter().flat_map(|f| [&f.q, &f.d]))
            .collect::<Vec<_>>();
        idents.sort();
        idents.dedup();
        for id in idents {
            if !is_identifier(id) {
                out.push(Violation::InvalidIdentifier(id.clone()));
            }
        }

        for list in [&self.inputs, &self.outputs] {
            let mut seen = HashSet::new();
            for net in list {
                if !seen.insert(net.as_str()) {
                    out.push(Violation::DuplicateDeclaration(net.clone()));
                }
            }
        }

        for g in &self.gates {
            if g.inputs.len() != g.kind.arity() {
                out.push(Violation::ArityMismatch {
                    gate: g.output.clone(),
                    kind: g.kind,
                    expected: g.kind.arity(),
                    found: g.inputs.len(),
                });
            }
        }

        let mut driver_count: HashMap<&str, usize> = HashMap::new();
        for net in self.driven_nets() {
            *driver_count.entry(net).or_default() += 1;
        }
        let mut dups: Vec<&str> = driver_count
            .iter()
            .filter(|(_, &c)| c > 1)
            .map(|(n, _)| *n)
            .collect();
        dups.sort_by_key(|n| self.driven_nets().iter().position(|m| m == n));
        out.extend(dups.into_iter().map(|n| Violation::DuplicateDriver(n.to_string())));

        let mut undriven = Vec::new();
        let reads = self
            .gates
            .iter()
            .flat_map(|g| g.inputs.iter())
            .chain(self.flops.iter().map(|f| &f.d))
            .chain(&self.outputs);
        for net in reads {
            if !driver_count.contains_key(net.as_str()) && !undriven.contains(net) {
                undriven.push(net.clone());
            }
        }
        out.extend(undriven.into_iter().map(Violation::UndrivenNet));

        if let Err(net) = self.levelize() {
            out.push(Violation::CombinationalCycle(net));
        }

        out.sort_by_key(Violation::rank);
        out
    }

    /// Gate indices in dependency order; ties resolve to declaration order.
    /// Inputs, flop outputs and undriven nets count as sources.
    fn levelize(&self) -> Result<Vec<usize>, String> {
        let drivers = self.drivers();
        let n = self.gates.len();
        let mut indegree = vec![0usize; n];
        let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, g) in self.gates.iter().enumerate() {
            for net in &g.inputs {
                if let Some(Driver::Gate(src)) = drivers.get(net.as_str()) {
                    indegree[i] += 1;
                    fanout[*src].push(i);
                }
            }
        }
        let mut ready: BinaryHeap<Reverse<usize>> = indegree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| Reverse(i))
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(i)) = ready.pop() {
            order.push(i);
            for &j in &fanout[i] {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(Reverse(j));
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap();
            Err(self.gates[stuck].output.clone())
        }
    }

    /// Gate indices such that every gate follows the gates driving its
    /// inputs.
    pub fn topological_indices(&self) -> Result<Vec<usize>, Violation> {
        self.levelize().map_err(Violation::CombinationalCycle)
    }

    /// Gate ids in dependency order, ties broken by declaration order.
    pub fn topological_order(&self) -> Result<Vec<String>, Violation> {
        Ok(self
            .topological_indices()?
            .into_iter()
            .map(|i| self.gates[i].output.clone())
            .collect())
    }

    /// Combinational frame seen through a scan chain: every flop output
    /// becomes an extra primary input and every flop data net an extra
    /// primary output, appended in flop declaration order.
    pub fn scan_frame(&self) -> Netlist {
        let mut frame = self.clone();
        frame.flops.clear();
        frame.inputs.extend(self.flops.iter().map(|f| f.q.clone()));
        frame.outputs.extend(self.flops.iter().map(|f| f.d.clone()));
        frame
    }

    /// Nets read by at least one gate, flop or primary output.
    pub fn fanout_counts(&self) -> HashMap<&str, usize> {
        let mut map: HashMap<&str, usize> = HashMap::new();
        let reads = self
            .gates
            .iter()
            .flat_map(|g| g.inputs.iter())
            .chain(self.flops.iter().map(|f| &f.d))
            .chain(&self.outputs);
        for net in reads {
            *map.entry(net.as_str()).or_default() += 1;
        }
        map
    }
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Parses CAMO-v1 text into a validated netlist.
pub fn parse_netlist(text: &str) -> Result<Netlist, ParseError> {
    let mut netlist = Netlist::default();
    let mut seen_inputs = false;
    let mut seen_outputs = false;
    let mut seen_body = false;
    let mut ended = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("");
        // (column, token) pairs, columns 1-based.
        let mut tokens = Vec::new();
        let mut start = None;
        for (i, c) in content.char_indices() {
            match (c.is_whitespace(), start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    tokens.push((s + 1, &content[s..i]));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            tokens.push((s + 1, &content[s..]));
        }
        let Some(&(col, directive)) = tokens.first() else {
            continue;
        };
        if ended {
            return Err(syntax(line, col, "content after `.end`"));
        }
        let args = &tokens[1..];
        let ident = |&(c, tok): &(usize, &str)| -> Result<String, ParseError> {
            if is_identifier(tok) {
                Ok(tok.to_string())
            } else {
                Err(syntax(line, c, format!("invalid identifier `{tok}`")))
            }
        };
        match directive {
            ".model" => {
                if seen_inputs || seen_outputs || seen_body || !netlist.name.is_empty() {
                    return Err(syntax(line, col, "`.model` must come first"));
                }
                match args {
                    [name] => netlist.name = ident(name)?,
                    _ => return Err(syntax(line, col, "`.model` takes one name")),
                }
            }
            ".inputs" | ".outputs" => {
                let is_inputs = directive == ".inputs";
                let seen = if is_inputs {
                    &mut seen_inputs
                } else {
                    &mut seen_outputs
                };
                if *seen {
                    return Err(syntax(line, col, format!("duplicate `{directive}` line")));
                }
                if seen_body {
                    return Err(syntax(line, col, format!("`{directive}` after gate or flop")));
                }
                if args.is_empty() {
                    return Err(syntax(line, col, format!("`{directive}` needs at least one net")));
                }
                *seen = true;
                let nets = args.iter().map(ident).collect::<Result<Vec<_>, _>>()?;
                if is_inputs {
                    netlist.inputs = nets;
                } else {
                    netlist.outputs = nets;
                }
            }
            ".gate" => {
                if !seen_inputs {
                    return Err(syntax(line, col, "`.gate` before `.inputs`"));
                }
                seen_body = true;
                let [kind_tok, out, ins @ ..] = args else {
                    return Err(syntax(line, col, "`.gate` needs a kind and an output"));
                };
                let kind: GateKind = kind_tok
                    .1
                    .parse()
                    .map_err(|m: String| syntax(line, kind_tok.0, m))?;
                let inputs = ins.iter().map(ident).collect::<Result<Vec<_>, _>>()?;
                netlist.gates.push(Gate {
                    kind,
                    output: ident(out)?,
                    inputs,
                });
            }
            ".flop" => {
                if !seen_inputs {
                    return Err(syntax(line, col, "`.flop` before `.inputs`"));
                }
                seen_body = true;
                let [q, d, init] = args else {
                    return Err(syntax(line, col, "`.flop` takes <q> <d> <init-bit>"));
                };
                let init = match init.1 {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(syntax(line, init.0, format!("init bit must be 0 or 1, got `{other}`")))
                    }
                };
                netlist.flops.push(Flop {
                    q: ident(q)?,
                    d: ident(d)?,
                    init,
                });
            }
            ".end" => {
                if !args.is_empty() {
                    return Err(syntax(line, args[0].0, "`.end` takes no arguments"));
                }
                ended = true;
            }
            other => return Err(syntax(line, col, format!("unknown directive `{other}`"))),
        }
    }

    if !ended {
        let last = text.lines().count().max(1);
        return Err(syntax(last, 1, "missing `.end`"));
    }
    if !seen_inputs {
        return Err(syntax(1, 1, "missing `.inputs` line"));
    }
    match netlist.validate().into_iter().next() {
        Some(v) => Err(ParseError::Invalid(v)),
        None => Ok(netlist),
    }
}

/// Canonical CAMO-v1 text: header comment, `.model`, `.inputs`, `.outputs`,
/// gates and flops in declaration order, `.end`.
pub fn serialize_netlist(n: &Netlist) -> String {
    let mut s = String::from("# CAMO-v1\n");
    let name = if n.name.is_empty() { "top" } else { &n.name };
    s.push_str(&format!(".model {name}\n"));
    s.push_str(".inputs");
    for net in &n.inputs {
        s.push(' ');
        s.push_str(net);
    }
    s.push('\n');
    s.push_str(".outputs");
    for net in &n.outputs {
        s.push(' ');
        s.push_str(net);
    }
    s.push('\n');
    for g in &n.gates {
        s.push_str(&format!(".gate {} {}", g.kind, g.output));
        for i in &g.inputs {
            s.push(' ');
            s.push_str(i);
        }
        s.push('\n');
    }
    for f in &n.flops {
        s.push_str(&format!(".flop {} {} {}\n", f.q, f.d, f.init as u8));
    }
    s.push_str(".end\n");
    s
}

impl fmt::Display for Netlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_netlist(self))
    }
}

impl FromStr for Netlist {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_netlist(s)
    }
}

/// Hands out net names that collide with nothing already in a netlist.
#[derive(Debug, Clone)]
pub struct NameGen {
    taken: HashSet<String>,
}

impl NameGen {
    pub fn new(n: &Netlist) -> Self {
        let mut taken = HashSet::new();
        for net in n.driven_nets() {
            taken.insert(net.to_string());
        }
        taken.extend(n.outputs.iter().cloned());
        for g in &n.gates {
            taken.extend(g.inputs.iter().cloned());
        }
        for f in &n.flops {
            taken.insert(f.d.clone());
        }
        NameGen { taken }
    }

    pub fn fresh(&mut self, base: &str) -> String {
        if self.taken.insert(base.to_string()) {
            return base.to_string();
        }
        let mut i = 1usize;
        loop {
            let candidate = format!("{base}_{i}");
            if self.taken.insert(candidate.clone()) {
                return candidate;
            }
            i += 1;
        }
    }
}
