//! Bottom-up grounding and evaluation of stratified programs.
//!
//! Facts are loaded into per-predicate relations, rules are compiled into
//! join plans and evaluated stratum by stratum with semi-naive iteration.
//! For a stratified program the computed atom set is its unique answer set.
//! Ground rule instances can be collected alongside: an instance is emitted
//! whenever a rule body is satisfied, which is what a lazy instantiator
//! would keep.
//!
//! Join plans scan the positive body atoms in their written order; indexes
//! over the bound argument positions are built lazily per relation.
//! Comparisons and negative literals run at the earliest point where all
//! their variables are bound. An arithmetic argument whose variables are
//! still unbound when its atom is scanned matches any value and is checked
//! as soon as the variables arrive. Arithmetic is over integers; division by
//! zero, overflow, or arithmetic on a symbol discards the instantiation.
//! Order comparisons work on two integers (numerically) or two symbols
//! (lexicographically); a mixed comparison discards the instantiation, while
//! `=`/`!=` compare structurally.
//!
//! Besides wall-clock time, evaluation maintains a work counter (tuples
//! examined, checks evaluated, insert attempts) as a deterministic,
//! platform-independent cost measure.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::time::{Duration, Instant};

use crate::ast::{ArithOp, Atom, Constant, Literal, Program, Rel, Rule, RuleViolation, Term};
use crate::parser::RESERVED_PREDICATE_PREFIX;

#[derive(Debug, Clone, Default)]
pub struct GroundConfig {
    /// Abort with [`GroundError::Timeout`] once the work counter passes this.
    pub work_limit: Option<u64>,
    /// Abort with [`GroundError::Timeout`] once this much wall time elapsed.
    pub timeout: Option<Duration>,
    /// Collect the instantiated rules, not only the derived atoms.
    pub collect_ground_rules: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroundError {
    #[error("disjunctive rule cannot be grounded here: {rule}")]
    Disjunctive { rule: String },
    #[error("program is not stratified: {predicate} is negated within its own recursive component")]
    Unstratified { predicate: String },
    #[error("line {line}: {violation}")]
    Invalid { line: u32, violation: RuleViolation },
    #[error("grounding exceeded its time or work budget")]
    Timeout,
}

#[derive(Debug, Clone)]
pub struct GroundResult {
    /// Every atom of the computed model (input facts included), sorted.
    pub atoms: Vec<Atom>,
    /// Distinct ground rule instances, present when requested in the config;
    /// facts are not repeated here.
    pub ground_rules: Vec<Rule>,
    /// Ground constraint instances whose body is satisfied by the model.
    pub violated_constraints: u64,
    /// Deterministic evaluation cost.
    pub work: u64,
    pub elapsed: Duration,
}

impl GroundResult {
    /// The atoms minus the reserved linking/safety predicates, i.e. the part
    /// comparable across a rewrite.
    pub fn visible_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.atoms
            .iter()
            .filter(|a| !a.predicate.starts_with(RESERVED_PREDICATE_PREFIX))
    }
}

/// Grounds and evaluates a program.
pub fn ground_program(program: &Program, cfg: &GroundConfig) -> Result<GroundResult, GroundError> {
    let start = Instant::now();
    let mut grounder = Grounder::new(program, cfg, start)?;
    grounder.run()?;
    Ok(grounder.finish(start))
}

type PredId = usize;
type Sym = u32;

/// A runtime value: integer or interned symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Value {
    Int(i64),
    Sym(Sym),
}

#[derive(Debug, Default)]
struct Interner {
    names: Vec<String>,
    ids: HashMap<String, Sym>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> Sym {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as Sym;
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    fn name(&self, id: Sym) -> &str {
        &self.names[id as usize]
    }
}

/// Tuple store for one predicate: insertion-ordered tuples, a membership
/// set, and lazily built indexes keyed by the mask of bound positions.
#[derive(Debug, Default)]
struct Relation {
    ordered: Vec<Vec<Value>>,
    set: HashSet<Vec<Value>>,
    /// Start of the current delta; tuples before it are "old".
    delta_start: usize,
    indexes: HashMap<u64, MaskIndex>,
}

#[derive(Debug, Default)]
struct MaskIndex {
    upto: usize,
    map: HashMap<Vec<Value>, Vec<usize>>,
}

impl Relation {
    fn insert(&mut self, tuple: Vec<Value>) -> bool {
        if self.set.contains(&tuple) {
            return false;
        }
        self.set.insert(tuple.clone());
        self.ordered.push(tuple);
        true
    }

    fn contains(&self, tuple: &[Value]) -> bool {
        self.set.contains(tuple)
    }

    /// Extends the index for `mask` (bit i set = position i is a key) over
    /// all tuples present right now.
    fn ensure_index(&mut self, mask: u64) {
        let index = self.indexes.entry(mask).or_default();
        for ordinal in index.upto..self.ordered.len() {
            let key = masked_key(&self.ordered[ordinal], mask);
            index.map.entry(key).or_default().push(ordinal);
        }
        index.upto = self.ordered.len();
    }

    /// Ordinals of tuples matching `key` under `mask`, restricted to
    /// `range`. The index must have been extended past `range.end`.
    fn lookup(&self, mask: u64, key: &[Value], range: std::ops::Range<usize>) -> &[usize] {
        let Some(index) = self.indexes.get(&mask) else {
            return &[];
        };
        debug_assert!(index.upto >= range.end);
        let Some(ordinals) = index.map.get(key) else {
            return &[];
        };
        let lo = ordinals.partition_point(|&o| o < range.start);
        let hi = ordinals.partition_point(|&o| o < range.end);
        &ordinals[lo..hi]
    }
}

fn masked_key(tuple: &[Value], mask: u64) -> Vec<Value> {
    tuple
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, v)| *v)
        .collect()
}

/// A compiled term: evaluates to a value in an environment of slots.
#[derive(Debug, Clone)]
enum Expr {
    Const(Value),
    Slot(usize),
    Arith {
        op: ArithOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
}

impl Expr {
    /// `None` discards the instantiation (type error, overflow, or division
    /// by zero).
    fn eval(&self, env: &[Option<Value>]) -> Option<Value> {
        match self {
            Expr::Const(v) => Some(*v),
            Expr::Slot(s) => env[*s],
            Expr::Arith { op, left, right } => {
                let (Value::Int(a), Value::Int(b)) = (left.eval(env)?, right.eval(env)?) else {
                    return None;
                };
                let r = match op {
                    ArithOp::Add => a.checked_add(b),
                    ArithOp::Sub => a.checked_sub(b),
                    ArithOp::Mul => a.checked_mul(b),
                    ArithOp::Div => a.checked_div(b),
                };
                r.map(Value::Int)
            }
        }
    }
}

/// One argument position of a scan.
#[derive(Debug, Clone)]
enum ScanArg {
    /// Unbound variable: take the tuple's value.
    Bind(usize),
    /// Bound expression: part of the index key.
    Pre(Expr),
    /// Must equal an earlier position of the same tuple.
    SamePos(usize),
    /// Arithmetic whose variables are not bound yet: capture the value into
    /// a temporary slot and check later.
    Capture(usize),
    Any,
}

/// A test that runs once all its variables are bound.
#[derive(Debug, Clone)]
enum Check {
    Builtin { rel: Rel, left: Expr, right: Expr },
    Naf { pred: PredId, args: Vec<Expr> },
    /// Deferred arithmetic argument: the expression must equal the captured
    /// tuple value.
    PendingEq { expr: Expr, temp: usize },
}

#[derive(Debug)]
struct ScanStep {
    pred: PredId,
    args: Vec<ScanArg>,
    /// Index key positions (the `Pre` arguments).
    mask: u64,
    /// Checks that become evaluable after this scan binds its variables.
    checks_after: Vec<Check>,
    /// The predicate belongs to the same recursive component as the head,
    /// so semi-naive delta variants apply to this scan.
    recursive: bool,
}

/// Where ground-rule reconstruction finds each body literal.
#[derive(Debug)]
enum BodyShape {
    Positive { scan: usize },
    Naf { pred: PredId, args: Vec<Expr> },
    Builtin,
}

#[derive(Debug)]
struct Plan {
    scans: Vec<ScanStep>,
    /// Checks with no unbound variables, run before any scan.
    pre_checks: Vec<Check>,
    /// `None` for constraints.
    head: Option<(PredId, Vec<Expr>)>,
    body_shape: Vec<BodyShape>,
    slots: usize,
}

/// Which relation segment a scan reads in a semi-naive variant.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Segment {
    Full,
    Delta,
    Old,
}

/// Mutable state of one plan execution: the variable environment, the tuple
/// matched at each scan (kept only when ground rules are collected), and the
/// buffered derivations.
struct ExecState {
    env: Vec<Option<Value>>,
    matched: Vec<Option<Vec<Value>>>,
    derived: Vec<(PredId, Vec<Value>)>,
}

impl ExecState {
    fn for_plan(plan: &Plan) -> ExecState {
        ExecState {
            env: vec![None; plan.slots],
            matched: vec![None; plan.scans.len()],
            derived: Vec::new(),
        }
    }
}

struct Counters {
    work: u64,
    work_limit: Option<u64>,
    deadline: Option<Instant>,
    next_deadline_probe: u64,
}

impl Counters {
    fn tick(&mut self, amount: u64) -> Result<(), GroundError> {
        self.work += amount;
        if let Some(limit) = self.work_limit {
            if self.work > limit {
                return Err(GroundError::Timeout);
            }
        }
        if let Some(deadline) = self.deadline {
            if self.work >= self.next_deadline_probe {
                self.next_deadline_probe = self.work + 4096;
                if Instant::now() > deadline {
                    return Err(GroundError::Timeout);
                }
            }
        }
        Ok(())
    }
}

struct Grounder<'p> {
    program: &'p Program,
    interner: Interner,
    /// (name, arity) -> id; keeps distinct arities distinct.
    pred_ids: BTreeMap<(String, usize), PredId>,
    pred_names: Vec<(String, usize)>,
    relations: Vec<Relation>,
    plans: Vec<Plan>,
    constraint_plans: Vec<Plan>,
    /// Evaluation order: strata as sets of predicate ids, dependencies first.
    strata: Vec<Vec<PredId>>,
    counters: Counters,
    collect: bool,
    ground_rules: HashSet<Rule>,
    ground_rule_order: Vec<Rule>,
    violated_constraints: u64,
}

impl<'p> Grounder<'p> {
    fn new(
        program: &'p Program,
        cfg: &GroundConfig,
        start: Instant,
    ) -> Result<Grounder<'p>, GroundError> {
        for rule in &program.statements {
            if rule.head.len() > 1 {
                return Err(GroundError::Disjunctive {
                    rule: rule.to_string(),
                });
            }
            if let Err(violation) = rule.validate() {
                return Err(GroundError::Invalid {
                    line: rule.line,
                    violation,
                });
            }
        }

        let mut grounder = Grounder {
            program,
            interner: Interner::default(),
            pred_ids: BTreeMap::new(),
            pred_names: Vec::new(),
            relations: Vec::new(),
            plans: Vec::new(),
            constraint_plans: Vec::new(),
            strata: Vec::new(),
            counters: Counters {
                work: 0,
                work_limit: cfg.work_limit,
                deadline: cfg.timeout.map(|t| start + t),
                next_deadline_probe: 0,
            },
            collect: cfg.collect_ground_rules,
            ground_rules: HashSet::new(),
            ground_rule_order: Vec::new(),
            violated_constraints: 0,
        };

        // Register every predicate so undefined ones resolve to empty
        // relations.
        for rule in &program.statements {
            for atom in &rule.head {
                grounder.pred_id(atom);
            }
            for lit in &rule.body {
                if let Literal::Atom { atom, .. } = lit {
                    grounder.pred_id(atom);
                }
            }
        }

        grounder.load_facts()?;
        grounder.stratify()?;
        grounder.compile()?;
        Ok(grounder)
    }

    fn pred_id(&mut self, atom: &Atom) -> PredId {
        let key = (atom.predicate.clone(), atom.args.len());
        if let Some(&id) = self.pred_ids.get(&key) {
            return id;
        }
        let id = self.relations.len();
        self.pred_ids.insert(key.clone(), id);
        self.pred_names.push(key);
        self.relations.push(Relation::default());
        id
    }

    fn load_facts(&mut self) -> Result<(), GroundError> {
        for rule in self.program.facts() {
            let atom = &rule.head[0];
            let pred = self.pred_id(atom);
            let mut tuple = Vec::with_capacity(atom.args.len());
            let mut ok = true;
            for arg in &atom.args {
                match self.eval_ground_term(arg) {
                    Some(v) => tuple.push(v),
                    None => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                self.counters.tick(1)?;
                self.relations[pred].insert(tuple);
            }
        }
        Ok(())
    }

    fn eval_ground_term(&mut self, term: &Term) -> Option<Value> {
        match term {
            Term::Constant(Constant::Int(n)) => Some(Value::Int(*n)),
            Term::Constant(Constant::Sym(s)) => Some(Value::Sym(self.interner.intern(s))),
            Term::Variable(_) | Term::Anonymous => None,
            Term::Arith { op, left, right } => {
                let (Value::Int(a), Value::Int(b)) =
                    (self.eval_ground_term(left)?, self.eval_ground_term(right)?)
                else {
                    return None;
                };
                match op {
                    ArithOp::Add => a.checked_add(b),
                    ArithOp::Sub => a.checked_sub(b),
                    ArithOp::Mul => a.checked_mul(b),
                    ArithOp::Div => a.checked_div(b),
                }
                .map(Value::Int)
            }
        }
    }

    /// Splits the defined predicates into strata: strongly connected
    /// components of the head-to-body dependency graph, dependencies first.
    /// Negation into the own component is the unstratified case.
    fn stratify(&mut self) -> Result<(), GroundError> {
        let idb: BTreeSet<PredId> = self
            .program
            .statements
            .iter()
            .filter(|r| !r.is_fact())
            .flat_map(|r| r.head.iter())
            .map(|a| self.pred_ids[&(a.predicate.clone(), a.args.len())])
            .collect();

        // pos/neg dependency edges between defined predicates.
        let mut edges: BTreeMap<PredId, BTreeSet<(PredId, bool)>> = BTreeMap::new();
        for pred in &idb {
            edges.entry(*pred).or_default();
        }
        for rule in self.program.statements.iter().filter(|r| !r.is_fact()) {
            for head in &rule.head {
                let h = self.pred_ids[&(head.predicate.clone(), head.args.len())];
                for lit in &rule.body {
                    if let Literal::Atom { atom, naf } = lit {
                        let b = self.pred_ids[&(atom.predicate.clone(), atom.args.len())];
                        if idb.contains(&b) {
                            edges.get_mut(&h).expect("idb pred").insert((b, *naf));
                        }
                    }
                }
            }
        }

        let sccs = tarjan_sccs(&edges);
        let mut component: BTreeMap<PredId, usize> = BTreeMap::new();
        for (i, scc) in sccs.iter().enumerate() {
            for &p in scc {
                component.insert(p, i);
            }
        }
        for (&h, deps) in &edges {
            for &(b, naf) in deps {
                if naf && component[&h] == component[&b] {
                    return Err(GroundError::Unstratified {
                        predicate: self.pred_names[b].0.clone(),
                    });
                }
            }
        }
        self.strata = sccs;
        Ok(())
    }

    fn compile(&mut self) -> Result<(), GroundError> {
        let component_of: BTreeMap<PredId, usize> = self
            .strata
            .iter()
            .enumerate()
            .flat_map(|(i, scc)| scc.iter().map(move |&p| (p, i)))
            .collect();

        for rule in &self.program.statements {
            if rule.is_fact() {
                continue;
            }
            let head_component = rule
                .head
                .first()
                .map(|a| component_of[&self.pred_ids[&(a.predicate.clone(), a.args.len())]]);
            let plan = self.compile_rule(rule, head_component);
            if rule.is_constraint() {
                self.constraint_plans.push(plan);
            } else {
                self.plans.push(plan);
            }
        }
        Ok(())
    }

    fn compile_rule(&mut self, rule: &Rule, head_component: Option<usize>) -> Plan {
        let mut slot_of: BTreeMap<String, usize> = BTreeMap::new();
        let mut slots = 0usize;
        let slot = |name: &str, slots: &mut usize, map: &mut BTreeMap<String, usize>| {
            *map.entry(name.to_string()).or_insert_with(|| {
                let s = *slots;
                *slots += 1;
                s
            })
        };

        // Variable slots are handed out in order of first mention; capture
        // temporaries share the same space.
        let mut scans: Vec<ScanStep> = Vec::new();
        let mut body_shape: Vec<BodyShape> = Vec::new();
        let mut deferred: Vec<(Check, BTreeSet<String>)> = Vec::new();
        let mut bound: BTreeSet<String> = BTreeSet::new();

        for lit in &rule.body {
            match lit {
                Literal::Atom { atom, naf: false } => {
                    let pred = self.pred_id(atom);
                    let mut args = Vec::with_capacity(atom.args.len());
                    let mut seen_here: BTreeMap<&str, usize> = BTreeMap::new();
                    let mut mask = 0u64;
                    for (pos, arg) in atom.args.iter().enumerate() {
                        match arg {
                            Term::Anonymous => args.push(ScanArg::Any),
                            Term::Constant(c) => {
                                mask |= 1 << pos;
                                args.push(ScanArg::Pre(Expr::Const(self.value_of(c))));
                            }
                            Term::Variable(v) => {
                                if let Some(&first) = seen_here.get(v.as_str()) {
                                    args.push(ScanArg::SamePos(first));
                                } else if bound.contains(v.as_str()) {
                                    mask |= 1 << pos;
                                    let s = slot(v, &mut slots, &mut slot_of);
                                    args.push(ScanArg::Pre(Expr::Slot(s)));
                                    seen_here.insert(v, pos);
                                } else {
                                    let s = slot(v, &mut slots, &mut slot_of);
                                    args.push(ScanArg::Bind(s));
                                    seen_here.insert(v, pos);
                                }
                            }
                            Term::Arith { .. } => {
                                let vars: BTreeSet<String> =
                                    term_vars(arg).into_iter().collect();
                                if vars.iter().all(|v| bound.contains(v)) {
                                    mask |= 1 << pos;
                                    let expr =
                                        self.compile_term(arg, &mut slot_of, &mut slots);
                                    args.push(ScanArg::Pre(expr));
                                } else {
                                    let temp = slots;
                                    slots += 1;
                                    let expr =
                                        self.compile_term(arg, &mut slot_of, &mut slots);
                                    args.push(ScanArg::Capture(temp));
                                    deferred.push((Check::PendingEq { expr, temp }, vars));
                                }
                            }
                        }
                    }
                    for v in atom.binding_vars() {
                        bound.insert(v.to_string());
                    }
                    body_shape.push(BodyShape::Positive { scan: scans.len() });
                    scans.push(ScanStep {
                        pred,
                        args,
                        mask,
                        checks_after: Vec::new(),
                        recursive: false,
                    });
                }
                Literal::Atom { atom, naf: true } => {
                    let pred = self.pred_id(atom);
                    let args: Vec<Expr> = atom
                        .args
                        .iter()
                        .map(|t| self.compile_term(t, &mut slot_of, &mut slots))
                        .collect();
                    let vars: BTreeSet<String> =
                        atom.vars().into_iter().map(str::to_string).collect();
                    body_shape.push(BodyShape::Naf {
                        pred,
                        args: args.clone(),
                    });
                    deferred.push((Check::Naf { pred, args }, vars));
                }
                Literal::Builtin { rel, left, right } => {
                    let vars: BTreeSet<String> = lit.vars().into_iter().map(str::to_string).collect();
                    let l = self.compile_term(left, &mut slot_of, &mut slots);
                    let r = self.compile_term(right, &mut slot_of, &mut slots);
                    body_shape.push(BodyShape::Builtin);
                    deferred.push((
                        Check::Builtin {
                            rel: *rel,
                            left: l,
                            right: r,
                        },
                        vars,
                    ));
                }
            }
        }

        // Place every deferred check at the earliest scan after which its
        // variables are all bound.
        let mut pre_checks = Vec::new();
        for (check, vars) in deferred {
            let mut bound: BTreeSet<&str> = BTreeSet::new();
            let mut placed = false;
            if vars.is_empty() {
                pre_checks.push(check);
                continue;
            }
            for (k, lit) in rule
                .body
                .iter()
                .filter(|l| matches!(l, Literal::Atom { naf: false, .. }))
                .enumerate()
            {
                bound.extend(lit.binding_vars());
                if vars.iter().all(|v| bound.contains(v.as_str())) {
                    scans[k].checks_after.push(check);
                    placed = true;
                    break;
                }
            }
            debug_assert!(placed, "safety guarantees every check becomes evaluable");
        }

        // Mark the scans whose predicate is recursive with the head.
        if let Some(hc) = head_component {
            let component_of: BTreeMap<PredId, usize> = self
                .strata
                .iter()
                .enumerate()
                .flat_map(|(i, scc)| scc.iter().map(move |&p| (p, i)))
                .collect();
            for scan in &mut scans {
                scan.recursive = component_of.get(&scan.pred) == Some(&hc);
            }
        }

        let head = rule.head.first().map(|atom| {
            let pred = self.pred_id(atom);
            let args: Vec<Expr> = atom
                .args
                .iter()
                .map(|t| self.compile_term(t, &mut slot_of, &mut slots))
                .collect();
            (pred, args)
        });

        Plan {
            scans,
            pre_checks,
            head,
            body_shape,
            slots,
        }
    }

    fn value_of(&mut self, c: &Constant) -> Value {
        match c {
            Constant::Int(n) => Value::Int(*n),
            Constant::Sym(s) => Value::Sym(self.interner.intern(s)),
        }
    }

    fn compile_term(
        &mut self,
        term: &Term,
        slot_of: &mut BTreeMap<String, usize>,
        slots: &mut usize,
    ) -> Expr {
        match term {
            Term::Constant(c) => Expr::Const(self.value_of(c)),
            Term::Variable(v) => {
                let s = *slot_of.entry(v.clone()).or_insert_with(|| {
                    let s = *slots;
                    *slots += 1;
                    s
                });
                Expr::Slot(s)
            }
            Term::Anonymous => {
                unreachable!("validation keeps anonymous terms out of compiled expressions")
            }
            Term::Arith { op, left, right } => Expr::Arith {
                op: *op,
                left: Box::new(self.compile_term(left, slot_of, slots)),
                right: Box::new(self.compile_term(right, slot_of, slots)),
            },
        }
    }

    fn run(&mut self) -> Result<(), GroundError> {
        let strata = std::mem::take(&mut self.strata);
        let plans = std::mem::take(&mut self.plans);
        for scc in &strata {
            let scc_set: BTreeSet<PredId> = scc.iter().copied().collect();
            let stratum_plans: Vec<&Plan> = plans
                .iter()
                .filter(|p| {
                    p.head
                        .as_ref()
                        .is_some_and(|(pred, _)| scc_set.contains(pred))
                })
                .collect();
            if stratum_plans.is_empty() {
                continue;
            }
            self.evaluate_stratum(&scc_set, &stratum_plans)?;
        }
        let constraint_plans = std::mem::take(&mut self.constraint_plans);
        for plan in &constraint_plans {
            self.ensure_plan_indexes(plan);
            let snapshot: Vec<usize> = self.relations.iter().map(|r| r.ordered.len()).collect();
            let mut state = ExecState::for_plan(plan);
            self.execute(plan, None, &snapshot, &mut state, 0)?;
            self.violated_constraints += state.derived.len() as u64;
        }
        self.constraint_plans = constraint_plans;
        self.plans = plans;
        self.strata = strata;
        Ok(())
    }

    fn evaluate_stratum(
        &mut self,
        scc: &BTreeSet<PredId>,
        plans: &[&Plan],
    ) -> Result<(), GroundError> {
        for &pred in scc {
            self.relations[pred].delta_start = 0;
        }
        let mut first_round = true;
        loop {
            let snapshot: Vec<usize> = self.relations.iter().map(|r| r.ordered.len()).collect();
            let mut inserted = false;
            for plan in plans {
                self.ensure_plan_indexes(plan);
                let variants: Vec<Option<usize>> = if first_round {
                    vec![None]
                } else {
                    plan.scans
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| s.recursive)
                        .map(|(i, _)| Some(i))
                        .collect()
                };
                for variant in variants {
                    let mut state = ExecState::for_plan(plan);
                    self.execute(plan, variant, &snapshot, &mut state, 0)?;
                    for (pred, tuple) in state.derived {
                        self.counters.tick(1)?;
                        if self.relations[pred].insert(tuple) {
                            inserted = true;
                        }
                    }
                }
            }
            for &pred in scc {
                self.relations[pred].delta_start = snapshot[pred];
            }
            // Rules not recursive in this component contribute no variants
            // after the first round, so they run exactly once.
            if first_round {
                first_round = false;
                if !inserted {
                    break;
                }
            } else if !inserted {
                break;
            }
        }
        Ok(())
    }

    fn ensure_plan_indexes(&mut self, plan: &Plan) {
        for scan in &plan.scans {
            if scan.mask != 0 {
                self.relations[scan.pred].ensure_index(scan.mask);
            }
        }
    }

    /// Joins the scans of `plan` from position `k` onward under the current
    /// environment, buffering derivations.
    fn execute(
        &mut self,
        plan: &Plan,
        variant: Option<usize>,
        snapshot: &[usize],
        state: &mut ExecState,
        k: usize,
    ) -> Result<(), GroundError> {
        if k == 0 {
            for check in &plan.pre_checks {
                self.counters.tick(1)?;
                if !self.check_holds(check, &state.env) {
                    return Ok(());
                }
            }
        }
        if k == plan.scans.len() {
            return self.emit(plan, state);
        }
        let scan = &plan.scans[k];
        let segment = match variant {
            Some(d) if scan.recursive => match k.cmp(&d) {
                std::cmp::Ordering::Less => Segment::Full,
                std::cmp::Ordering::Equal => Segment::Delta,
                std::cmp::Ordering::Greater => Segment::Old,
            },
            _ => Segment::Full,
        };
        let relation = &self.relations[scan.pred];
        let range = match segment {
            Segment::Full => 0..snapshot[scan.pred],
            Segment::Delta => relation.delta_start..snapshot[scan.pred],
            Segment::Old => 0..relation.delta_start,
        };

        // Resolve the index key; a failed bound-expression evaluation means
        // no tuple can match.
        let mut key = Vec::new();
        let mut key_ok = true;
        for arg in &scan.args {
            if let ScanArg::Pre(expr) = arg {
                match expr.eval(&state.env) {
                    Some(v) => key.push(v),
                    None => {
                        key_ok = false;
                        break;
                    }
                }
            }
        }
        if !key_ok {
            return Ok(());
        }

        let ordinals: Vec<usize> = if scan.mask != 0 {
            self.relations[scan.pred]
                .lookup(scan.mask, &key, range)
                .to_vec()
        } else {
            range.collect()
        };

        'tuples: for ordinal in ordinals {
            self.counters.tick(1)?;
            let mut written: Vec<usize> = Vec::new();
            {
                let tuple = &self.relations[scan.pred].ordered[ordinal];
                let mut key_iter = key.iter();
                for (pos, arg) in scan.args.iter().enumerate() {
                    let value = tuple[pos];
                    match arg {
                        ScanArg::Any => {}
                        ScanArg::Pre(_) => {
                            // Index lookups already matched these; a full
                            // scan (mask 0) has no Pre args by construction.
                            debug_assert_eq!(key_iter.next(), Some(&value));
                        }
                        ScanArg::SamePos(first) => {
                            if tuple[*first] != value {
                                for &w in &written {
                                    state.env[w] = None;
                                }
                                continue 'tuples;
                            }
                        }
                        ScanArg::Bind(slot) | ScanArg::Capture(slot) => {
                            state.env[*slot] = Some(value);
                            written.push(*slot);
                        }
                    }
                }
            }
            if self.collect {
                state.matched[k] = Some(self.relations[scan.pred].ordered[ordinal].clone());
            }
            let mut ok = true;
            for check in &scan.checks_after {
                self.counters.tick(1)?;
                if !self.check_holds(check, &state.env) {
                    ok = false;
                    break;
                }
            }
            if ok {
                self.execute(plan, variant, snapshot, state, k + 1)?;
            }
            for &w in &written {
                state.env[w] = None;
            }
        }
        Ok(())
    }

    fn check_holds(&self, check: &Check, env: &[Option<Value>]) -> bool {
        match check {
            Check::Builtin { rel, left, right } => {
                let (Some(a), Some(b)) = (left.eval(env), right.eval(env)) else {
                    return false;
                };
                match rel {
                    Rel::Eq => a == b,
                    Rel::Ne => a != b,
                    _ => {
                        let ordering = match (a, b) {
                            (Value::Int(x), Value::Int(y)) => x.cmp(&y),
                            (Value::Sym(x), Value::Sym(y)) => {
                                self.interner.name(x).cmp(self.interner.name(y))
                            }
                            _ => return false,
                        };
                        match rel {
                            Rel::Lt => ordering.is_lt(),
                            Rel::Le => ordering.is_le(),
                            Rel::Gt => ordering.is_gt(),
                            Rel::Ge => ordering.is_ge(),
                            Rel::Eq | Rel::Ne => unreachable!(),
                        }
                    }
                }
            }
            Check::Naf { pred, args } => {
                let mut tuple = Vec::with_capacity(args.len());
                for arg in args {
                    match arg.eval(env) {
                        Some(v) => tuple.push(v),
                        None => return false,
                    }
                }
                !self.relations[*pred].contains(&tuple)
            }
            Check::PendingEq { expr, temp } => expr.eval(env) == env[*temp],
        }
    }

    fn emit(&mut self, plan: &Plan, state: &mut ExecState) -> Result<(), GroundError> {
        if let Some((pred, args)) = &plan.head {
            let mut tuple = Vec::with_capacity(args.len());
            for arg in args {
                match arg.eval(&state.env) {
                    Some(v) => tuple.push(v),
                    None => return Ok(()),
                }
            }
            if self.collect {
                self.record_ground_rule(plan, &state.env, &state.matched, Some((*pred, &tuple)));
            }
            state.derived.push((*pred, tuple));
        } else {
            if self.collect {
                self.record_ground_rule(plan, &state.env, &state.matched, None);
            }
            state.derived.push((usize::MAX, Vec::new()));
        }
        Ok(())
    }

    /// Rebuilds the satisfied instantiation as a ground rule: positive atoms
    /// as matched, negative atoms evaluated, comparisons dropped.
    fn record_ground_rule(
        &mut self,
        plan: &Plan,
        env: &[Option<Value>],
        matched: &[Option<Vec<Value>>],
        head: Option<(PredId, &[Value])>,
    ) {
        let head_atoms = match head {
            Some((pred, tuple)) => vec![self.atom_of(pred, tuple)],
            None => Vec::new(),
        };
        let mut body = Vec::new();
        for shape in &plan.body_shape {
            match shape {
                BodyShape::Positive { scan } => {
                    let step = &plan.scans[*scan];
                    let tuple = matched[*scan].as_ref().expect("every scan matched by now");
                    body.push(Literal::pos(self.atom_of(step.pred, tuple)));
                }
                BodyShape::Naf { pred, args } => {
                    let tuple: Vec<Value> = args
                        .iter()
                        .map(|a| a.eval(env).expect("naf checked already"))
                        .collect();
                    body.push(Literal::naf(self.atom_of(*pred, &tuple)));
                }
                BodyShape::Builtin => {}
            }
        }
        let rule = Rule::new(head_atoms, body);
        if self.ground_rules.insert(rule.clone()) {
            self.ground_rule_order.push(rule);
        }
    }

    fn atom_of(&self, pred: PredId, tuple: &[Value]) -> Atom {
        let (name, _) = &self.pred_names[pred];
        Atom::new(
            name.clone(),
            tuple.iter().map(|v| self.term_of(*v)).collect(),
        )
    }

    fn term_of(&self, value: Value) -> Term {
        match value {
            Value::Int(n) => Term::int(n),
            Value::Sym(s) => Term::sym(self.interner.name(s)),
        }
    }

    fn finish(self, start: Instant) -> GroundResult {
        let mut atoms = Vec::new();
        for (pred, relation) in self.relations.iter().enumerate() {
            for tuple in &relation.ordered {
                atoms.push(self.atom_of(pred, tuple));
            }
        }
        atoms.sort_unstable();
        GroundResult {
            atoms,
            ground_rules: self.ground_rule_order,
            violated_constraints: self.violated_constraints,
            work: self.counters.work,
            elapsed: start.elapsed(),
        }
    }
}

fn term_vars(term: &Term) -> Vec<String> {
    let mut set = BTreeSet::new();
    term.collect_vars(&mut set);
    set.into_iter().map(str::to_string).collect()
}

/// Iterative Tarjan strongly connected components over a predicate
/// dependency map; emits components dependencies-first.
fn tarjan_sccs(edges: &BTreeMap<PredId, BTreeSet<(PredId, bool)>>) -> Vec<Vec<PredId>> {
    #[derive(Default, Clone)]
    struct NodeState {
        index: Option<usize>,
        lowlink: usize,
        on_stack: bool,
    }
    let nodes: Vec<PredId> = edges.keys().copied().collect();
    let mut state: BTreeMap<PredId, NodeState> = nodes
        .iter()
        .map(|&n| (n, NodeState::default()))
        .collect();
    let mut counter = 0usize;
    let mut stack: Vec<PredId> = Vec::new();
    let mut sccs: Vec<Vec<PredId>> = Vec::new();

    for &root in &nodes {
        if state[&root].index.is_some() {
            continue;
        }
        // Explicit DFS stack: (node, iterator position into its successors).
        let mut call_stack: Vec<(PredId, usize)> = vec![(root, 0)];
        state.get_mut(&root).unwrap().index = Some(counter);
        state.get_mut(&root).unwrap().lowlink = counter;
        counter += 1;
        stack.push(root);
        state.get_mut(&root).unwrap().on_stack = true;

        while let Some(&mut (node, ref mut pos)) = call_stack.last_mut() {
            let succs: Vec<PredId> = edges[&node].iter().map(|&(p, _)| p).collect();
            if *pos < succs.len() {
                let next = succs[*pos];
                *pos += 1;
                let next_state = &state[&next];
                match next_state.index {
                    None => {
                        let entry = state.get_mut(&next).unwrap();
                        entry.index = Some(counter);
                        entry.lowlink = counter;
                        entry.on_stack = true;
                        counter += 1;
                        stack.push(next);
                        call_stack.push((next, 0));
                    }
                    Some(next_index) if next_state.on_stack => {
                        let node_state = state.get_mut(&node).unwrap();
                        node_state.lowlink = node_state.lowlink.min(next_index);
                    }
                    Some(_) => {}
                }
            } else {
                call_stack.pop();
                let node_low = state[&node].lowlink;
                let node_index = state[&node].index.unwrap();
                if let Some(&(parent, _)) = call_stack.last() {
                    let parent_state = state.get_mut(&parent).unwrap();
                    parent_state.lowlink = parent_state.lowlink.min(node_low);
                }
                if node_low == node_index {
                    let mut scc = Vec::new();
                    loop {
                        let top = stack.pop().expect("scc member on stack");
                        state.get_mut(&top).unwrap().on_stack = false;
                        scc.push(top);
                        if top == node {
                            break;
                        }
                    }
                    scc.sort_unstable();
                    sccs.push(scc);
                }
            }
        }
    }
    sccs
}

/// How grounding cost is reported by [`time_grounding`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimingMode {
    /// Median wall-clock time over `reps` runs after one warmup run.
    #[default]
    Wall,
    /// The deterministic work counter of a single run.
    Work,
}

#[derive(Debug, Clone)]
pub struct TimingConfig {
    pub mode: TimingMode,
    pub reps: u32,
    pub timeout: Option<Duration>,
    pub work_limit: Option<u64>,
}

impl Default for TimingConfig {
    fn default() -> Self {
        TimingConfig {
            mode: TimingMode::Wall,
            reps: 3,
            timeout: None,
            work_limit: None,
        }
    }
}

/// A grounding cost measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timing {
    Wall(Duration),
    Work(u64),
    /// The run exceeded the configured time or work budget.
    TimedOut,
}

impl Timing {
    /// The cost as a comparable number (nanoseconds or work units); timeouts
    /// have no magnitude.
    pub fn magnitude(&self) -> Option<f64> {
        match self {
            Timing::Wall(d) => Some(d.as_secs_f64() * 1e9),
            Timing::Work(w) => Some(*w as f64),
            Timing::TimedOut => None,
        }
    }
}

/// Measures the grounding cost of a program. Hard errors (invalid or
/// unstratified input) are returned as errors; exceeding the budget is the
/// `TimedOut` measurement.
pub fn time_grounding(program: &Program, cfg: &TimingConfig) -> Result<Timing, GroundError> {
    let ground_cfg = GroundConfig {
        work_limit: cfg.work_limit,
        timeout: cfg.timeout,
        collect_ground_rules: false,
    };
    match cfg.mode {
        TimingMode::Work => match ground_program(program, &ground_cfg) {
            Ok(result) => Ok(Timing::Work(result.work)),
            Err(GroundError::Timeout) => Ok(Timing::TimedOut),
            Err(err) => Err(err),
        },
        TimingMode::Wall => {
            let reps = cfg.reps.max(1);
            let mut samples = Vec::with_capacity(reps as usize);
            for rep in 0..=reps {
                match ground_program(program, &ground_cfg) {
                    Ok(result) => {
                        // The first run warms caches and is not counted.
                        if rep > 0 {
                            samples.push(result.elapsed);
                        }
                    }
                    Err(GroundError::Timeout) => return Ok(Timing::TimedOut),
                    Err(err) => return Err(err),
                }
            }
            samples.sort_unstable();
            Ok(Timing::Wall(samples[samples.len() / 2]))
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error(transparent)]
    Grounding(#[from] GroundError),
    #[error("oracle i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("oracle command failed with {status}: {stderr}")]
    Command { status: String, stderr: String },
    #[error("oracle output line is not a ground atom: {line}")]
    Output { line: String },
}

/// Something that can measure the grounding cost of a program, so labeling
/// can run against this crate's evaluator or an external grounder.
pub trait CostOracle {
    fn measure(&self, program: &Program) -> Result<Timing, OracleError>;
}

/// The built-in evaluator as a cost oracle.
#[derive(Debug, Clone, Default)]
pub struct InternalCost {
    pub config: TimingConfig,
}

impl CostOracle for InternalCost {
    fn measure(&self, program: &Program) -> Result<Timing, OracleError> {
        Ok(time_grounding(program, &self.config)?)
    }
}

/// An external grounder timed end to end; `{file}` in the template is
/// replaced with the path of a file holding the program. Each run is a cold
/// process, so there is no warmup run; the reported cost is the median
/// wall-clock time of `reps` runs. A run past the timeout is killed and
/// reported as `TimedOut`.
#[derive(Debug, Clone)]
pub struct ExternalCost {
    pub command_template: String,
    pub timeout: Option<Duration>,
    pub reps: u32,
}

impl CostOracle for ExternalCost {
    fn measure(&self, program: &Program) -> Result<Timing, OracleError> {
        use std::io::Write as _;
        let mut file = tempfile::NamedTempFile::new()?;
        write!(file, "{program}")?;
        let command = self
            .command_template
            .replace("{file}", &file.path().display().to_string());
        let mut samples = Vec::new();
        for _ in 0..self.reps.max(1) {
            let start = Instant::now();
            let deadline = self.timeout.map(|t| start + t);
            let mut child = std::process::Command::new("sh")
                .arg("-c")
                .arg(&command)
                .stdout(std::process::Stdio::null())
                .stderr(std::process::Stdio::null())
                .spawn()?;
            let status = loop {
                if let Some(status) = child.try_wait()? {
                    break status;
                }
                if deadline.is_some_and(|d| Instant::now() > d) {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Ok(Timing::TimedOut);
                }
                std::thread::sleep(Duration::from_millis(1));
            };
            if !status.success() {
                return Err(OracleError::Command {
                    status: status.to_string(),
                    stderr: format!("(stderr not captured) command: {command}"),
                });
            }
            samples.push(start.elapsed());
        }
        samples.sort_unstable();
        Ok(Timing::Wall(samples[samples.len() / 2]))
    }
}

/// Something that can compute the atom set of a program; lets equivalence
/// checks run against this crate's evaluator or an external grounder.
pub trait GroundingOracle {
    fn derived_atoms(&self, program: &Program) -> Result<BTreeSet<Atom>, OracleError>;
}

/// The built-in evaluator as an oracle.
#[derive(Debug, Default)]
pub struct InternalOracle {
    pub config: GroundConfig,
}

impl GroundingOracle for InternalOracle {
    fn derived_atoms(&self, program: &Program) -> Result<BTreeSet<Atom>, OracleError> {
        let result = ground_program(program, &self.config)?;
        Ok(result.atoms.into_iter().collect())
    }
}

/// An external grounder invoked as a shell command; `{file}` in the template
/// is replaced with the path of a file holding the program. The command must
/// print one ground atom per line (a trailing `.` is accepted).
#[derive(Debug)]
pub struct ExternalOracle {
    pub command_template: String,
}

impl GroundingOracle for ExternalOracle {
    fn derived_atoms(&self, program: &Program) -> Result<BTreeSet<Atom>, OracleError> {
        use std::io::Write as _;
        let mut file = tempfile::NamedTempFile::new()?;
        write!(file, "{program}")?;
        let command = self
            .command_template
            .replace("{file}", &file.path().display().to_string());
        let output = std::process::Command::new("sh")
            .arg("-c")
            .arg(&command)
            .output()?;
        if !output.status.success() {
            return Err(OracleError::Command {
                status: output.status.to_string(),
                stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
            });
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let mut atoms = BTreeSet::new();
        for line in stdout.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let source = format!("{}.", line.trim_end_matches('.'));
            let opts = crate::parser::ParseOptions {
                allow_reserved_predicates: true,
            };
            let program = crate::parser::parse_program_with(&source, &opts).map_err(|_| {
                OracleError::Output {
                    line: line.to_string(),
                }
            })?;
            match program.statements.first() {
                Some(rule) if rule.is_fact() => atoms.insert(rule.head[0].clone()),
                _ => {
                    return Err(OracleError::Output {
                        line: line.to_string(),
                    })
                }
            };
        }
        Ok(atoms)
    }
}
