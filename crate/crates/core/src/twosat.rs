//! 2SAT by strongly connected components of the implication graph.

/// A literal: variable index with polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lit {
    pub var: usize,
    pub positive: bool,
}

impl Lit {
    pub fn pos(var: usize) -> Lit {
        Lit {
            var,
            positive: true,
        }
    }

    pub fn neg(var: usize) -> Lit {
        Lit {
            var,
            positive: false,
        }
    }

    fn index(self) -> usize {
        self.var * 2 + self.positive as usize
    }

    fn negated(self) -> Lit {
        Lit {
            var: self.var,
            positive: !self.positive,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct TwoSat {
    n_vars: usize,
    clauses: Vec<(Lit, Lit)>,
}

impl TwoSat {
    pub fn new(n_vars: usize) -> TwoSat {
        TwoSat {
            n_vars,
            clauses: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn add_var(&mut self) -> usize {
        self.n_vars += 1;
        self.n_vars - 1
    }

    /// Adds the clause (a or b).
    pub fn clause(&mut self, a: Lit, b: Lit) {
        debug_assert!(a.var < self.n_vars && b.var < self.n_vars);
        self.clauses.push((a, b));
    }

    /// Forces a literal (unit clause).
    pub fn unit(&mut self, a: Lit) {
        self.clause(a, a);
    }

    /// x == value.
    pub fn assign(&mut self, var: usize, value: bool) {
        self.unit(Lit {
            var,
            positive: value,
        });
    }

    /// x == y (equality) or x != y (inequality).
    pub fn relate(&mut self, x: usize, y: usize, equal: bool) {
        if equal {
            self.clause(Lit::neg(x), Lit::pos(y));
            self.clause(Lit::pos(x), Lit::neg(y));
        } else {
            self.clause(Lit::neg(x), Lit::neg(y));
            self.clause(Lit::pos(x), Lit::pos(y));
        }
    }

    /// Satisfying assignment, or None.
    pub fn solve(&self) -> Option<Vec<bool>> {
        self.solve_assuming(&[])
    }

    /// Solves with extra unit clauses.
    pub fn solve_assuming(&self, assumptions: &[Lit]) -> Option<Vec<bool>> {
        let n = self.n_vars;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); 2 * n];
        let add = |a: Lit, b: Lit, adj: &mut Vec<Vec<usize>>| {
            // (a or b): !a -> b, !b -> a.
            adj[a.negated().index()].push(b.index());
            adj[b.negated().index()].push(a.index());
        };
        for &(a, b) in &self.clauses {
            add(a, b, &mut adj);
        }
        for &a in assumptions {
            add(a, a, &mut adj);
        }
        // Tarjan SCC, iterative.
        const UNSET: usize = usize::MAX;
        let m = 2 * n;
        let mut index = vec![UNSET; m];
        let mut low = vec![0usize; m];
        let mut on_stack = vec![false; m];
        let mut comp = vec![UNSET; m];
        let mut stack: Vec<usize> = Vec::new();
        let mut call: Vec<(usize, usize)> = Vec::new();
        let mut counter = 0;
        let mut n_comp = 0;
        for s in 0..m {
            if index[s] != UNSET {
                continue;
            }
            call.push((s, 0));
            index[s] = counter;
            low[s] = counter;
            counter += 1;
            stack.push(s);
            on_stack[s] = true;
            while let Some(&mut (v, ref mut ei)) = call.last_mut() {
                if *ei < adj[v].len() {
                    let w = adj[v][*ei];
                    *ei += 1;
                    if index[w] == UNSET {
                        index[w] = counter;
                        low[w] = counter;
                        counter += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        call.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    call.pop();
                    if low[v] == index[v] {
                        loop {
                            let w = stack.pop().unwrap();
                            on_stack[w] = false;
                            comp[w] = n_comp;
                            if w == v {
                                break;
                            }
                        }
                        n_comp += 1;
                    }
                    if let Some(&(p, _)) = call.last() {
                        low[p] = low[p].min(low[v]);
                    }
                }
            }
        }
        let mut out = vec![false; n];
        for v in 0..n {
            let t = comp[Lit::pos(v).index()];
            let f = comp[Lit::neg(v).index()];
            if t == f {
                return None;
            }
            // Tarjan numbers components in reverse topological order: a
            // literal is true when its component comes earlier topologically
            // than its negation's, i.e. has the SMALLER Tarjan id? Components
            // are finished in topological-sink-first order, so larger comp id
            // means closer to the sources. Choose x true iff comp[x] < comp[!x].
            out[v] = t < f;
        }
        Some(out)
    }

    /// Whether the formula with assumptions is satisfiable.
    pub fn satisfiable(&self, assumptions: &[Lit]) -> bool {
        self.solve_assuming(assumptions).is_some()
    }
}
