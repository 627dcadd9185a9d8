//! Per-state evaluation of transformers by structural recursion.
//!
//! Straight-line constructs follow the transformer rules directly. A loop is
//! resolved as the limit of the iterates `Φⁿ(0)(σ)`:
//!
//! * when the body is loop-free, by pushing the loop-head sub-distribution
//!   forward one unfolding at a time and adding up the mass that exits (the
//!   `n`-th partial sum equals `Φⁿ(0)(σ)` by linearity);
//! * otherwise by backward recursion on `(remaining unfoldings, state)` with
//!   memoisation, which resolves inner loops state by state.

use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::domain::{
    eval_assignment, eval_guard, to_f64, Convergence, EvalOptions, ExtNonNeg, Increments, IwValue,
    LoopMode, LoopTrace, State,
};
use crate::error::{EvalError, EvalResult};
use crate::frontend::{ProbGuard, Program};

const MAX_TRACES: usize = 64;

pub(crate) type Post<'a, V> = &'a dyn Fn(&State) -> EvalResult<V>;
type OwnedPost<'a, V> = Box<dyn Fn(&State) -> EvalResult<V> + 'a>;

/// Values a program transformer can compute at a state.
pub(crate) trait Semiring: Clone + Sized {
    fn zero() -> Self;
    fn plus(&self, other: &Self) -> Self;
    /// Scaling by a branch weight `p` with `0 < p <= 1`.
    fn times(&self, p: &BigRational) -> EvalResult<Self>;
    fn while_value(
        engine: &Engine,
        guard: &ProbGuard,
        body: &Program,
        post: Post<Self>,
        s: &State,
    ) -> EvalResult<Self>;
}

/// Several non-negative expectations transformed together.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Multi(pub Vec<ExtNonNeg>);

impl Semiring for Multi {
    fn zero() -> Self {
        Multi(Vec::new())
    }

    fn plus(&self, other: &Self) -> Self {
        let n = self.0.len().max(other.0.len());
        let zero = ExtNonNeg::zero();
        Multi(
            (0..n)
                .map(|i| {
                    self.0
                        .get(i)
                        .unwrap_or(&zero)
                        .add(other.0.get(i).unwrap_or(&zero))
                })
                .collect(),
        )
    }

    fn times(&self, p: &BigRational) -> EvalResult<Self> {
        self.0
            .iter()
            .map(|v| Semiring::times(v, p))
            .collect::<EvalResult<Vec<_>>>()
            .map(Multi)
    }

    fn while_value(
        engine: &Engine,
        guard: &ProbGuard,
        body: &Program,
        post: Post<Self>,
        s: &State,
    ) -> EvalResult<Self> {
        let arity = engine.multi_arity.get();
        engine.loop_value(guard, body, post, s, arity).map(Multi)
    }
}

impl Semiring for ExtNonNeg {
    fn zero() -> Self {
        ExtNonNeg::zero()
    }

    fn plus(&self, other: &Self) -> Self {
        self.add(other)
    }

    fn times(&self, p: &BigRational) -> EvalResult<Self> {
        self.scale(p)
            .ok_or_else(|| EvalError::ZeroTimesInf(format!("{p} * inf")))
    }

    fn while_value(
        engine: &Engine,
        guard: &ProbGuard,
        body: &Program,
        post: Post<Self>,
        s: &State,
    ) -> EvalResult<Self> {
        let lifted = |t: &State| post(t).map(|v| Multi(vec![v]));
        let mut out = engine.loop_value(guard, body, &lifted, s, 1)?;
        Ok(out.swap_remove(0))
    }
}

impl Semiring for IwValue {
    fn zero() -> Self {
        IwValue::zero()
    }

    fn plus(&self, other: &Self) -> Self {
        self.add(other)
    }

    fn times(&self, p: &BigRational) -> EvalResult<Self> {
        self.scale(p)
    }

    fn while_value(
        engine: &Engine,
        guard: &ProbGuard,
        body: &Program,
        post: Post<Self>,
        s: &State,
    ) -> EvalResult<Self> {
        let lifted = |t: &State| post(t).map(|v| Multi(decompose(&v).to_vec()));
        let out = engine.loop_value(guard, body, &lifted, s, 3)?;
        Ok(recompose(&out[0], &out[1], &out[2]))
    }
}

/// `(|f| + f, |f|, g)` for a pair `(f, g)`.
pub(crate) fn decompose(v: &IwValue) -> [ExtNonNeg; 3] {
    let f = v.first();
    let abs = f.abs();
    [
        ExtNonNeg::Finite(&abs + f),
        ExtNonNeg::Finite(abs),
        v.witness().clone(),
    ]
}

/// The canonical pair `(a - b, c)`.
pub(crate) fn recompose(a: &ExtNonNeg, b: &ExtNonNeg, c: &ExtNonNeg) -> IwValue {
    match (a, b, c) {
        (ExtNonNeg::Finite(a), ExtNonNeg::Finite(b), ExtNonNeg::Finite(_)) => {
            IwValue::of(a - b, c.clone())
        }
        _ => IwValue::diverged(),
    }
}

pub(crate) struct Engine<'o> {
    pub opts: &'o EvalOptions,
    stats: RefCell<Convergence>,
    traces: RefCell<Vec<LoopTrace>>,
    /// Width of the vectors flowing through the innermost backward iteration.
    multi_arity: Cell<usize>,
}

impl<'o> Engine<'o> {
    pub fn new(opts: &'o EvalOptions) -> Self {
        Engine {
            opts,
            stats: RefCell::new(Convergence::default()),
            traces: RefCell::new(Vec::new()),
            multi_arity: Cell::new(0),
        }
    }

    pub fn convergence(&self) -> Convergence {
        self.stats.borrow().clone()
    }

    pub fn take_traces(&self) -> Vec<LoopTrace> {
        std::mem::take(&mut self.traces.borrow_mut())
    }

    pub fn run<V: Semiring>(&self, prog: &Program, post: Post<V>, s: &State) -> EvalResult<V> {
        match prog {
            Program::Skip => post(s),
            Program::Assign(x, e) => {
                let v = eval_assignment(x, e, s, &self.opts.series)?;
                post(&s.with(x, v))
            }
            Program::Seq(a, b) => self.run(a, &|t| self.run(b, post, t), s),
            Program::If(g, a, b) => {
                let p = eval_guard(g, s, &self.opts.series)?;
                let q = BigRational::one() - &p;
                let mut acc = V::zero();
                if p.is_positive() {
                    acc = acc.plus(&self.run(a, post, s)?.times(&p)?);
                }
                if q.is_positive() {
                    acc = acc.plus(&self.run(b, post, s)?.times(&q)?);
                }
                Ok(acc)
            }
            Program::While(g, body) => V::while_value(self, g, body, post, s),
        }
    }

    /// Output sub-distribution of a loop-free program, merged by state.
    pub fn distribution(&self, prog: &Program, s: &State) -> EvalResult<Vec<(State, BigRational)>> {
        let mut out = BTreeMap::new();
        self.spread(prog, s, BigRational::one(), &mut out)?;
        Ok(out.into_iter().collect())
    }

    fn spread(
        &self,
        prog: &Program,
        s: &State,
        mass: BigRational,
        out: &mut BTreeMap<State, BigRational>,
    ) -> EvalResult<()> {
        match prog {
            Program::Skip => {
                *out.entry(s.clone()).or_insert_with(BigRational::zero) += mass;
            }
            Program::Assign(x, e) => {
                let v = eval_assignment(x, e, s, &self.opts.series)?;
                *out.entry(s.with(x, v)).or_insert_with(BigRational::zero) += mass;
            }
            Program::Seq(a, b) => {
                for (t, m) in self.distribution(a, s)? {
                    self.spread(b, &t, &mass * m, out)?;
                }
            }
            Program::If(g, a, b) => {
                let p = eval_guard(g, s, &self.opts.series)?;
                let q = BigRational::one() - &p;
                if p.is_positive() {
                    self.spread(a, s, &mass * &p, out)?;
                }
                if q.is_positive() {
                    self.spread(b, s, &mass * &q, out)?;
                }
            }
            Program::While(..) => return Err(EvalError::LoopNotAllowed),
        }
        Ok(())
    }

    fn source<'a>(
        &'a self,
        guard: &'a ProbGuard,
        body: &'a Program,
        post: Post<'a, Multi>,
        s: &State,
        arity: usize,
    ) -> Source<'a, 'o> {
        if body.is_loop_free() {
            Source::Forward(Forward::new(self, guard, body, post, s))
        } else {
            Source::Backward(BackwardMulti::new(self, guard, body, post, s, arity))
        }
    }

    /// Exactly `n` unfoldings from zero, for each component of `post`.
    pub fn iterate_exact(
        &self,
        guard: &ProbGuard,
        body: &Program,
        post: Post<Multi>,
        s: &State,
        n: usize,
        arity: usize,
    ) -> EvalResult<Vec<ExtNonNeg>> {
        let mut src = self.source(guard, body, post, s, arity);
        let mut values = Vec::new();
        for _ in 0..n {
            let step = src.step()?;
            values = step.values;
            if step.finish == Finish::Exact {
                break;
            }
        }
        values.resize(arity, ExtNonNeg::zero());
        Ok(values)
    }

    /// Limit (or fixed-depth iterate, per the options) of a loop at `s`.
    pub fn loop_value(
        &self,
        guard: &ProbGuard,
        body: &Program,
        post: Post<Multi>,
        s: &State,
        arity: usize,
    ) -> EvalResult<Vec<ExtNonNeg>> {
        let policy = &self.opts.loops;
        if self.opts.loop_mode == LoopMode::Fixed(0) {
            return Ok(vec![ExtNonNeg::zero(); arity]);
        }
        let mut src = self.source(guard, body, post, s, arity);
        let mut rows: Vec<Vec<ExtNonNeg>> = Vec::new();
        let mut incs: Vec<Increments> =
            (0..arity).map(|_| Increments::new(policy.window)).collect();
        let mut prev: Vec<ExtNonNeg> = vec![ExtNonNeg::zero(); arity];
        let mut heuristic = false;
        let mut n = 0usize;

        let result = loop {
            let mut step = src.step()?;
            n += 1;
            step.values.resize(arity, ExtNonNeg::zero());
            if let Finish::Periodic(g) = &mut step.finish {
                g.resize(arity, false);
            }
            for (i, v) in step.values.iter().enumerate() {
                if let (ExtNonNeg::Finite(a), ExtNonNeg::Finite(b)) = (&prev[i], v) {
                    incs[i].push(b - a);
                }
            }
            prev = step.values.clone();
            if self.opts.trace {
                rows.push(step.values.clone());
            }

            if let LoopMode::Fixed(m) = self.opts.loop_mode {
                if n >= m || step.finish == Finish::Exact {
                    break step.values;
                }
                continue;
            }
            match &step.finish {
                Finish::Exact => break step.values,
                Finish::Periodic(growing) => {
                    break step
                        .values
                        .iter()
                        .zip(growing)
                        .map(|(v, &g)| if g { ExtNonNeg::Inf } else { v.clone() })
                        .collect();
                }
                Finish::No => {}
            }
            let residual_small = to_f64(&step.residual) < policy.tol;
            let decided: Vec<Option<ExtNonNeg>> = step
                .values
                .iter()
                .zip(&incs)
                .map(|(v, inc)| {
                    if v.is_inf() || v.to_f64() > policy.threshold {
                        Some(ExtNonNeg::Inf)
                    } else if residual_small && inc.settled(policy.tol) {
                        Some(v.clone())
                    } else if n >= policy.max_steps {
                        // Out of budget: keep values whose increments have
                        // died out, give up on the rest.
                        Some(if inc.settled(policy.tol) {
                            v.clone()
                        } else {
                            ExtNonNeg::Inf
                        })
                    } else {
                        None
                    }
                })
                .collect();
            if decided.iter().all(Option::is_some) {
                heuristic = true;
                break decided.into_iter().map(Option::unwrap).collect();
            }
        };

        let mut stats = self.stats.borrow_mut();
        stats.loop_evaluations += 1;
        stats.iterations = stats.iterations.max(n);
        stats.heuristic |= heuristic;
        stats.divergent |= result.iter().any(ExtNonNeg::is_inf);
        let last = incs
            .iter()
            .filter_map(|i| i.last().map(|a| to_f64(&a.abs())))
            .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
        if last.is_some() {
            stats.last_increment = last;
        }
        drop(stats);
        if self.opts.trace {
            let mut traces = self.traces.borrow_mut();
            if traces.len() < MAX_TRACES {
                traces.push(LoopTrace {
                    state: s.clone(),
                    rows,
                });
            }
        }
        Ok(result)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Finish {
    No,
    /// No mass is left at the loop head; the values are final.
    Exact,
    /// The loop-head distribution repeats, so every further unfolding adds
    /// the same increment. Flags the components whose increment is positive.
    Periodic(Vec<bool>),
}

struct Step {
    values: Vec<ExtNonNeg>,
    residual: BigRational,
    finish: Finish,
}

enum Source<'a, 'o> {
    Forward(Forward<'a, 'o>),
    Backward(BackwardMulti<'a, 'o>),
}

impl Source<'_, '_> {
    fn step(&mut self) -> EvalResult<Step> {
        match self {
            Source::Forward(f) => f.step(),
            Source::Backward(b) => b.step(),
        }
    }
}

/// One unfolding from a fixed loop-head state: the exit contribution
/// `(1 - p) post(s)` and the body's output distribution scaled by `p`.
struct Moves {
    exit: Vec<ExtNonNeg>,
    next: Vec<(State, BigRational)>,
    /// Lcm of the denominators in `exit` and `next`.
    lcm: BigInt,
    /// `exit` and `next` as integers over the step denominator `scaled_for`;
    /// `None` stands for an infinite exit value.
    scaled_exit: Vec<Option<BigInt>>,
    scaled_next: Vec<BigInt>,
    scaled_for: BigInt,
}

impl Moves {
    fn rescale(&mut self, scale: &BigInt) {
        if &self.scaled_for == scale {
            return;
        }
        let int = |r: &BigRational| (scale / r.denom()) * r.numer();
        self.scaled_exit = self.exit.iter().map(|v| v.finite().map(int)).collect();
        self.scaled_next = self.next.iter().map(|(_, m)| int(m)).collect();
        self.scaled_for = scale.clone();
    }
}

struct Forward<'a, 'o> {
    engine: &'a Engine<'o>,
    guard: &'a ProbGuard,
    body: &'a Program,
    post: Post<'a, Multi>,
    /// Loop-head masses as numerators over the common denominator `denom`.
    /// Supports grow quadratically on walks; with a shared denominator each
    /// update is an integer multiply-add rather than a rational addition
    /// with its gcd.
    frontier: BTreeMap<State, BigInt>,
    denom: BigInt,
    acc: Vec<ExtNonNeg>,
    moves: HashMap<State, Moves>,
}

impl<'a, 'o> Forward<'a, 'o> {
    fn new(
        engine: &'a Engine<'o>,
        guard: &'a ProbGuard,
        body: &'a Program,
        post: Post<'a, Multi>,
        s: &State,
    ) -> Self {
        let mut frontier = BTreeMap::new();
        frontier.insert(s.clone(), BigInt::one());
        Forward {
            engine,
            guard,
            body,
            post,
            frontier,
            denom: BigInt::one(),
            acc: Vec::new(),
            moves: HashMap::new(),
        }
    }

    fn moves_from(&self, s: &State) -> EvalResult<Moves> {
        let p = eval_guard(self.guard, s, &self.engine.opts.series)?;
        let q = BigRational::one() - &p;
        let exit = if q.is_positive() {
            (self.post)(s)?.times(&q)?.0
        } else {
            Vec::new()
        };
        let next: Vec<(State, BigRational)> = if p.is_positive() {
            self.engine
                .distribution(self.body, s)?
                .into_iter()
                .map(|(t, m)| (t, m * &p))
                .collect()
        } else {
            Vec::new()
        };
        let lcm = exit
            .iter()
            .filter_map(ExtNonNeg::finite)
            .chain(next.iter().map(|(_, m)| m))
            .fold(BigInt::one(), |l, r| l.lcm(r.denom()));
        Ok(Moves {
            exit,
            next,
            lcm,
            scaled_exit: Vec::new(),
            scaled_next: Vec::new(),
            scaled_for: BigInt::zero(),
        })
    }

    fn step(&mut self) -> EvalResult<Step> {
        let fresh: Vec<State> = self
            .frontier
            .keys()
            .filter(|s| !self.moves.contains_key(*s))
            .cloned()
            .collect();
        for s in fresh {
            let m = self.moves_from(&s)?;
            self.moves.insert(s, m);
        }
        let mut scale = BigInt::one();
        let mut seen: Vec<&BigInt> = Vec::new();
        for s in self.frontier.keys() {
            let l = &self.moves[s].lcm;
            if !seen.contains(&l) {
                scale = scale.lcm(l);
                seen.push(l);
            }
        }

        let mut next: BTreeMap<State, BigInt> = BTreeMap::new();
        let mut exit: Vec<Option<BigInt>> = Vec::new();
        for (s, n) in &self.frontier {
            let mv = self.moves.get_mut(s).expect("moves computed above");
            mv.rescale(&scale);
            if exit.len() < mv.scaled_exit.len() {
                exit.resize(mv.scaled_exit.len(), Some(BigInt::zero()));
            }
            for (e, k) in exit.iter_mut().zip(&mv.scaled_exit) {
                match (e.as_mut(), k) {
                    (Some(e), Some(k)) => *e += n * k,
                    _ => *e = None,
                }
            }
            for ((t, _), k) in mv.next.iter().zip(&mv.scaled_next) {
                *next.entry(t.clone()).or_insert_with(BigInt::zero) += n * k;
            }
        }
        let denom = &self.denom * &scale;
        let exit = Multi(
            exit.into_iter()
                .map(|e| match e {
                    Some(e) => ExtNonNeg::Finite(BigRational::new(e, denom.clone())),
                    None => ExtNonNeg::Inf,
                })
                .collect(),
        );
        let stationary = next.len() == self.frontier.len()
            && next
                .iter()
                .zip(&self.frontier)
                .all(|((t, a), (s, b))| t == s && a * &self.denom == b * &denom);
        let residual = BigRational::new(next.values().sum(), denom.clone());
        self.frontier = next;
        self.denom = denom;
        self.acc = Multi(std::mem::take(&mut self.acc)).plus(&exit).0;
        let finish = if self.frontier.is_empty() {
            Finish::Exact
        } else if stationary {
            let mut growing: Vec<bool> = exit.0.iter().map(|v| !v.is_zero()).collect();
            growing.resize(self.acc.len(), false);
            Finish::Periodic(growing)
        } else {
            Finish::No
        };
        Ok(Step {
            values: self.acc.clone(),
            residual,
            finish,
        })
    }
}

/// Backward iteration `Φᵏ(0)(τ) = (1-p) post(τ) + p wp(body, Φᵏ⁻¹(0))(τ)`,
/// memoised on `(k, τ)`.
pub(crate) struct Backward<'a, 'o, V> {
    engine: &'a Engine<'o>,
    guard: &'a ProbGuard,
    body: &'a Program,
    post: OwnedPost<'a, V>,
    memo: RefCell<HashMap<(usize, State), V>>,
}

impl<'a, 'o, V: Semiring> Backward<'a, 'o, V> {
    pub fn new(
        engine: &'a Engine<'o>,
        guard: &'a ProbGuard,
        body: &'a Program,
        post: OwnedPost<'a, V>,
    ) -> Self {
        Backward {
            engine,
            guard,
            body,
            post,
            memo: RefCell::new(HashMap::new()),
        }
    }

    pub fn at(&self, k: usize, s: &State) -> EvalResult<V> {
        if k == 0 {
            return Ok(V::zero());
        }
        let key = (k, s.clone());
        if let Some(v) = self.memo.borrow().get(&key) {
            return Ok(v.clone());
        }
        let p = eval_guard(self.guard, s, &self.engine.opts.series)?;
        let q = BigRational::one() - &p;
        let mut acc = V::zero();
        if q.is_positive() {
            acc = acc.plus(&(self.post)(s)?.times(&q)?);
        }
        if p.is_positive() {
            let inner = self.engine.run(self.body, &|t| self.at(k - 1, t), s)?;
            acc = acc.plus(&inner.times(&p)?);
        }
        self.memo.borrow_mut().insert(key, acc.clone());
        Ok(acc)
    }
}

/// Backward source for loops whose body contains loops. An extra constant
/// component tracks the terminated mass, giving the residual.
struct BackwardMulti<'a, 'o> {
    inner: Backward<'a, 'o, Multi>,
    root: State,
    n: usize,
    arity: usize,
}

impl<'a, 'o> BackwardMulti<'a, 'o> {
    fn new(
        engine: &'a Engine<'o>,
        guard: &'a ProbGuard,
        body: &'a Program,
        post: Post<'a, Multi>,
        s: &State,
        arity: usize,
    ) -> Self {
        let post_with_mass = Box::new(move |t: &State| {
            let mut v = post(t)?;
            v.0.resize(arity, ExtNonNeg::zero());
            v.0.push(ExtNonNeg::Finite(BigRational::one()));
            Ok(v)
        });
        BackwardMulti {
            inner: Backward::new(engine, guard, body, post_with_mass),
            root: s.clone(),
            n: 0,
            arity,
        }
    }

    fn step(&mut self) -> EvalResult<Step> {
        self.n += 1;
        let engine = self.inner.engine;
        let saved = engine.multi_arity.replace(self.arity + 1);
        let out = self.inner.at(self.n, &self.root);
        engine.multi_arity.set(saved);
        let mut v = out?.0;
        v.resize(self.arity + 1, ExtNonNeg::zero());
        let terminated = match v.pop() {
            Some(ExtNonNeg::Finite(m)) => m,
            _ => BigRational::zero(),
        };
        Ok(Step {
            values: v,
            residual: BigRational::one() - terminated,
            finish: Finish::No,
        })
    }
}
