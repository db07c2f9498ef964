//! The stochastic-shortest-path model: states, per-state action sets, the
//! flattened state-action index Γ and a known transition kernel whose
//! successors are either a state or the absorbing goal.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MdpError;

/// Index of a non-goal state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateId(pub usize);

/// Index of a state-action pair in the flattened set Γ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairId(pub usize);

/// Where a transition leads.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Successor {
    State(StateId),
    Goal,
}

/// One entry of a transition row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub next: Successor,
    pub prob: f64,
}

/// How strictly a description is checked when it is turned into a model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Validation {
    /// Rows must be stochastic and every state must be able to reach the goal.
    Strict,
    /// Only structural checks; used to run diagnostics on deliberately
    /// corrupted descriptions (rows are renormalised when sampled).
    Lenient,
}

/// Tolerance on `|Σ_{s'} P(s'|s,a) − 1|` for strict validation.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// JSON interchange form of an SSP instance.
///
/// ```json
/// {"states":["s0","s1"],"initial":"s0","goal":"g",
///  "actions":{"s0":["a"],"s1":["a"]},
///  "transitions":{"s0":{"a":[["s1",1.0]]},"s1":{"a":[["g",1.0]]}}}
/// ```
/// Successor names are state names or the goal name (the literal `"goal"`
/// is accepted as an alias).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub states: Vec<String>,
    pub initial: String,
    pub goal: String,
    pub actions: BTreeMap<String, Vec<String>>,
    pub transitions: BTreeMap<String, BTreeMap<String, Vec<(String, f64)>>>,
}

/// An SSP with known transitions. Pair indices are contiguous per state, in
/// the order the actions were declared; that order is also the tie-breaking
/// order used by the planners.
#[derive(Clone, Debug, PartialEq)]
pub struct SspMdp {
    state_names: Vec<String>,
    goal_name: String,
    initial: StateId,
    action_names: Vec<Vec<String>>,
    pair_offset: Vec<usize>,
    pair_state: Vec<StateId>,
    rows: Vec<Vec<Transition>>,
}

impl SspMdp {
    /// Builds and validates a model from its interchange form.
    pub fn from_document(doc: &MdpDocument, validation: Validation) -> Result<Self, MdpError> {
        let invalid = |msg: String| MdpError::Invalid(msg);
        if doc.states.is_empty() {
            return Err(invalid("the state list is empty".into()));
        }
        let mut index = HashMap::new();
        for (i, name) in doc.states.iter().enumerate() {
            if name == &doc.goal || name == "goal" {
                return Err(invalid(format!("state `{name}` clashes with the goal name")));
            }
            if index.insert(name.as_str(), i).is_some() {
                return Err(invalid(format!("duplicate state `{name}`")));
            }
        }
        let initial = *index
            .get(doc.initial.as_str())
            .ok_or_else(|| invalid(format!("initial state `{}` is not declared", doc.initial)))?;
        for name in doc.actions.keys().chain(doc.transitions.keys()) {
            if !index.contains_key(name.as_str()) {
                return Err(invalid(format!("unknown state `{name}` in actions/transitions")));
            }
        }

        let mut action_names = Vec::with_capacity(doc.states.len());
        let mut pair_offset = vec![0];
        let mut pair_state = Vec::new();
        let mut rows = Vec::new();
        for (s, name) in doc.states.iter().enumerate() {
            let actions = doc
                .actions
                .get(name)
                .filter(|a| !a.is_empty())
                .ok_or_else(|| invalid(format!("state `{name}` has no actions")))?;
            let table = doc.transitions.get(name);
            let mut seen = HashMap::new();
            for action in actions {
                if seen.insert(action.as_str(), ()).is_some() {
                    return Err(invalid(format!("duplicate action `{action}` at `{name}`")));
                }
                let entries = table
                    .and_then(|t| t.get(action))
                    .ok_or_else(|| invalid(format!("missing transition row for ({name},{action})")))?;
                let mut row = Vec::with_capacity(entries.len());
                for (target, prob) in entries {
                    if !prob.is_finite() || *prob < 0.0 || *prob > 1.0 + ROW_SUM_TOLERANCE {
                        return Err(invalid(format!(
                            "probability {prob} for ({name},{action})→{target} is outside [0,1]"
                        )));
                    }
                    let next = if target == &doc.goal || target == "goal" {
                        Successor::Goal
                    } else {
                        let t = index.get(target.as_str()).ok_or_else(|| {
                            invalid(format!("unknown successor `{target}` in ({name},{action})"))
                        })?;
                        Successor::State(StateId(*t))
                    };
                    if *prob > 0.0 {
                        row.push(Transition { next, prob: *prob });
                    }
                }
                let total: f64 = row.iter().map(|t| t.prob).sum();
                if validation == Validation::Strict && (total - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(invalid(format!(
                        "transition row ({name},{action}) sums to {total}, not 1"
                    )));
                }
                if row.is_empty() {
                    return Err(invalid(format!("transition row ({name},{action}) is empty")));
                }
                rows.push(row);
                pair_state.push(StateId(s));
            }
            if let Some(t) = table {
                if let Some(extra) = t.keys().find(|a| !seen.contains_key(a.as_str())) {
                    return Err(invalid(format!("transition for undeclared action ({name},{extra})")));
                }
            }
            action_names.push(actions.clone());
            pair_offset.push(pair_state.len());
        }

        let mdp = SspMdp {
            state_names: doc.states.clone(),
            goal_name: doc.goal.clone(),
            initial: StateId(initial),
            action_names,
            pair_offset,
            pair_state,
            rows,
        };
        if validation == Validation::Strict {
            let stuck = mdp.states_unable_to_reach_goal();
            if let Some(s) = stuck.first() {
                return Err(MdpError::NoProperPolicy(format!(
                    "state `{}` cannot reach the goal under any policy",
                    mdp.state_name(*s)
                )));
            }
        }
        Ok(mdp)
    }

    /// Parses and validates a JSON description.
    pub fn from_json_str(text: &str, validation: Validation) -> Result<Self, MdpError> {
        let doc: MdpDocument =
            serde_json::from_str(text).map_err(|e| MdpError::Parse(e.to_string()))?;
        Self::from_document(&doc, validation)
    }

    /// Reads and validates a JSON description from disk.
    pub fn load(path: impl AsRef<Path>, validation: Validation) -> Result<Self, MdpError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MdpError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text, validation)
    }

    /// The interchange form of this model.
    pub fn to_document(&self) -> MdpDocument {
        let mut actions = BTreeMap::new();
        let mut transitions = BTreeMap::new();
        for s in self.states() {
            let name = self.state_name(s).to_string();
            actions.insert(name.clone(), self.action_names[s.0].clone());
            let mut table = BTreeMap::new();
            for p in self.pairs_of(s) {
                let row = self.rows[p.0]
                    .iter()
                    .map(|t| {
                        let target = match t.next {
                            Successor::Goal => self.goal_name.clone(),
                            Successor::State(n) => self.state_name(n).to_string(),
                        };
                        (target, t.prob)
                    })
                    .collect();
                table.insert(self.action_name(p).to_string(), row);
            }
            transitions.insert(name, table);
        }
        MdpDocument {
            states: self.state_names.clone(),
            initial: self.state_name(self.initial).to_string(),
            goal: self.goal_name.clone(),
            actions,
            transitions,
        }
    }

    /// Serialises the model as pretty JSON.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("MDP documents always serialise")
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    /// |Γ|, the number of state-action pairs.
    pub fn num_pairs(&self) -> usize {
        self.pair_state.len()
    }

    /// Average number of actions per state, `|Γ| / |S|`.
    pub fn avg_actions(&self) -> f64 {
        self.num_pairs() as f64 / self.num_states() as f64
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn goal_name(&self) -> &str {
        &self.goal_name
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.num_states()).map(StateId)
    }

    pub fn pairs(&self) -> impl Iterator<Item = PairId> {
        (0..self.num_pairs()).map(PairId)
    }

    pub fn num_actions(&self, s: StateId) -> usize {
        self.pair_offset[s.0 + 1] - self.pair_offset[s.0]
    }

    /// Pairs available at `s`, in declaration order.
    pub fn pairs_of(&self, s: StateId) -> impl Iterator<Item = PairId> {
        (self.pair_offset[s.0]..self.pair_offset[s.0 + 1]).map(PairId)
    }

    /// The pair `(s, a)` where `a` is the action's position at `s`.
    pub fn pair(&self, s: StateId, action: usize) -> PairId {
        debug_assert!(action < self.num_actions(s));
        PairId(self.pair_offset[s.0] + action)
    }

    pub fn pair_state(&self, p: PairId) -> StateId {
        self.pair_state[p.0]
    }

    /// Position of the pair's action within its state's action list.
    pub fn pair_action(&self, p: PairId) -> usize {
        p.0 - self.pair_offset[self.pair_state[p.0].0]
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s.0]
    }

    pub fn action_name(&self, p: PairId) -> &str {
        &self.action_names[self.pair_state(p).0][self.pair_action(p)]
    }

    /// Looks a state up by name.
    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.state_names.iter().position(|n| n == name).map(StateId)
    }

    /// Human-readable `(s,a)` label used in cost and occupancy files.
    pub fn pair_label(&self, p: PairId) -> String {
        format!("({},{})", self.state_name(self.pair_state(p)), self.action_name(p))
    }

    /// Inverse of [`SspMdp::pair_label`].
    pub fn pair_by_label(&self, label: &str) -> Option<PairId> {
        let inner = label.trim().strip_prefix('(')?.strip_suffix(')')?;
        let (s, a) = inner.split_once(',')?;
        let s = self.state_by_name(s.trim())?;
        self.pairs_of(s).find(|p| self.action_name(*p) == a.trim())
    }

    /// The transition row of a pair.
    pub fn transitions(&self, p: PairId) -> &[Transition] {
        &self.rows[p.0]
    }

    /// Sum of a row's probabilities (1 for every strictly validated model).
    pub fn row_total(&self, p: PairId) -> f64 {
        self.rows[p.0].iter().map(|t| t.prob).sum()
    }

    /// `P(next | p)`, looked up by successor.
    pub fn prob(&self, p: PairId, next: Successor) -> f64 {
        self.rows[p.0].iter().filter(|t| t.next == next).map(|t| t.prob).sum()
    }

    /// States reachable from the initial state with positive probability
    /// under some policy, in breadth-first order.
    pub fn reachable_states(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        let mut queue = VecDeque::from([self.initial]);
        seen[self.initial.0] = true;
        while let Some(s) = queue.pop_front() {
            for p in self.pairs_of(s) {
                for t in &self.rows[p.0] {
                    if let Successor::State(n) = t.next {
                        if !seen[n.0] {
                            seen[n.0] = true;
                            queue.push_back(n);
                        }
                    }
                }
            }
        }
        seen
    }

    /// States from which no action sequence reaches the goal.
    pub fn states_unable_to_reach_goal(&self) -> Vec<StateId> {
        let n = self.num_states();
        let mut can = vec![false; n];
        let mut changed = true;
        while changed {
            changed = false;
            for p in self.pairs() {
                let s = self.pair_state(p);
                if can[s.0] {
                    continue;
                }
                let reaches = self.rows[p.0].iter().any(|t| match t.next {
                    Successor::Goal => true,
                    Successor::State(x) => can[x.0],
                });
                if reaches {
                    can[s.0] = true;
                    changed = true;
                }
            }
        }
        (0..n).filter(|s| !can[*s]).map(StateId).collect()
    }
}

impl fmt::Display for SspMdp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SSP with {} states, {} state-action pairs, initial `{}`",
            self.num_states(),
            self.num_pairs(),
            self.state_name(self.initial)
        )
    }
}
