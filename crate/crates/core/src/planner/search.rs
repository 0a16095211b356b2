//! Anytime batch-informed roadmap search with lazy edge validation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{segment_cost_exact, steer_weighted, CostWeights, PathSegment, PlanError, PlannedPath};
use crate::geometry::Pose2;
use crate::scene::{collision_check, segment_clearance, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Number of sampling batches; deterministic.
    Iterations(usize),
    /// Wall-clock limit; not reproducible.
    Seconds(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub weights: CostWeights,
    pub batch_size: usize,
    pub budget: Budget,
    /// Neighbor count is `max(min_neighbors, ceil(k_factor * ln n))`.
    pub k_factor: f64,
    pub min_neighbors: usize,
    pub allow_backward: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            weights: CostWeights::default(),
            batch_size: 100,
            budget: Budget::Iterations(4),
            k_factor: 2.0 * std::f64::consts::E,
            min_neighbors: 8,
            allow_backward: true,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        self.weights.validate()?;
        let budget_ok = match self.budget {
            Budget::Iterations(_) => true,
            Budget::Seconds(s) => s > 0.0,
        };
        if self.batch_size == 0 || !budget_ok || !(self.k_factor > 0.0) {
            return Err(PlanError::InvalidArgument(format!("invalid planner config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap.
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Per-vertex edge memo; vertex ids are never reused.
struct EdgeCache<T>(Vec<Vec<(usize, T)>>);

impl<T> Default for EdgeCache<T> {
    fn default() -> Self {
        Self(Vec::new())
    }
}

impl<T: Copy> EdgeCache<T> {
    fn get(&self, a: usize, b: usize) -> Option<T> {
        self.0.get(a)?.iter().find(|e| e.0 == b).map(|e| e.1)
    }

    fn insert(&mut self, a: usize, b: usize, v: T) {
        if self.0.len() <= a {
            self.0.resize_with(a + 1, Vec::new);
        }
        self.0[a].push((b, v));
    }
}

struct Roadmap<'a> {
    scene: &'a Scene,
    radius: f64,
    target: [f64; 2],
    cfg: &'a PlannerConfig,
    verts: Vec<Pose2>,
    alive: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
    cost_cache: EdgeCache<f64>,
    valid_cache: EdgeCache<bool>,
}

impl Roadmap<'_> {
    fn edge_segments(&self, a: usize, b: usize) -> Vec<PathSegment> {
        steer_weighted(&self.verts[a], &self.verts[b], &self.cfg.weights, self.cfg.allow_backward)
    }

    fn edge_cost(&mut self, a: usize, b: usize) -> f64 {
        if let Some(c) = self.cost_cache.get(a, b) {
            return c;
        }
        let mut pose = self.verts[a];
        let mut total = 0.0;
        for seg in self.edge_segments(a, b) {
            let (c, end) = segment_cost_exact(&pose, &seg, self.target, &self.cfg.weights);
            total += c;
            pose = end;
        }
        self.cost_cache.insert(a, b, total);
        total
    }

    fn edge_valid(&mut self, a: usize, b: usize) -> bool {
        let (lo, hi) = (a.min(b), a.max(b));
        if let Some(v) = self.valid_cache.get(lo, hi) {
            return v;
        }
        let v = segment_clearance(
            self.scene,
            self.verts[a].position(),
            self.verts[b].position(),
            self.radius,
        ) >= 0.0;
        self.valid_cache.insert(lo, hi, v);
        v
    }

    fn known_invalid(&self, a: usize, b: usize) -> bool {
        self.valid_cache.get(a.min(b), a.max(b)) == Some(false)
    }

    fn rebuild_neighbors(&mut self) {
        let ids: Vec<usize> = (0..self.verts.len()).filter(|&i| self.alive[i]).collect();
        let n = ids.len();
        let k = ((self.cfg.k_factor * (n.max(2) as f64).ln()).ceil() as usize)
            .max(self.cfg.min_neighbors)
            .min(n.saturating_sub(1));
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.verts.len()];
        for &i in &ids {
            let pi = self.verts[i];
            let mut d: Vec<(f64, usize)> = ids
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| {
                    let pj = self.verts[j];
                    ((pi.x - pj.x).powi(2) + (pi.y - pj.y).powi(2), j)
                })
                .collect();
            if k == 0 {
                continue;
            }
            d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, j) in d.iter().take(k) {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        // Start and goal are always candidates for a direct connection.
        adj[0].push(1);
        adj[1].push(0);
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        self.neighbors = adj;
    }

    /// A* from vertex 0 to vertex 1 over edges not yet known to be blocked.
    fn astar(&mut self) -> Option<(f64, Vec<usize>)> {
        let n = self.verts.len();
        let goal = self.verts[1].position();
        let h = |p: &Pose2| {
            self.cfg.weights.w_translate * (p.x - goal[0]).hypot(p.y - goal[1])
        };
        let heur: Vec<f64> = self.verts.iter().map(h).collect();
        let mut g = vec![f64::INFINITY; n];
        let mut parent = vec![usize::MAX; n];
        let mut closed = vec![false; n];
        let mut open = BinaryHeap::new();
        g[0] = 0.0;
        open.push(Key(heur[0], 0));
        while let Some(Key(_, u)) = open.pop() {
            if closed[u] {
                continue;
            }
            if u == 1 {
                let mut seq = vec![1];
                let mut v = 1;
                while v != 0 {
                    v = parent[v];
                    seq.push(v);
                }
                seq.reverse();
                return Some((g[1], seq));
            }
            closed[u] = true;
            let nbrs = self.neighbors[u].clone();
            for v in nbrs {
                if !self.alive[v] || closed[v] || self.known_invalid(u, v) {
                    continue;
                }
                let cand = g[u] + self.edge_cost(u, v);
                if cand < g[v] {
                    g[v] = cand;
                    parent[v] = u;
                    open.push(Key(cand + heur[v], v));
                }
            }
        }
        None
    }

    /// Lazy search: repeat A* until a path with all edges validated is found.
    fn search(&mut self) -> Option<(f64, Vec<usize>)> {
        loop {
            let (cost, seq) = self.astar()?;
            let mut all_ok = true;
            for w in seq.windows(2) {
                if !self.edge_valid(w[0], w[1]) {
                    all_ok = false;
                }
            }
            if all_ok {
                return Some((cost, seq));
            }
        }
    }

    fn sample_free(&self, rng: &mut ChaCha8Rng, informed: Option<f64>) -> Option<Pose2> {
        let b = self.scene.bounds;
        let r = self.radius;
        if b.w <= 2.0 * r || b.h <= 2.0 * r {
            return None;
        }
        let s = self.verts[0].position();
        let g = self.verts[1].position();
        for _ in 0..50 {
            let p = match informed {
                None => [rng.gen_range(r..b.w - r), rng.gen_range(r..b.h - r)],
                Some(c_max) => {
                    let c_min = (g[0] - s[0]).hypot(g[1] - s[1]);
                    let a = c_max / 2.0;
                    let bb = (c_max * c_max - c_min * c_min).max(0.0).sqrt() / 2.0;
                    let rad = rng.gen::<f64>().sqrt();
                    let ang = rng.gen_range(0.0..std::f64::consts::TAU);
                    let (ex, ey) = (a * rad * ang.cos(), bb * rad * ang.sin());
                    let axis = (g[1] - s[1]).atan2(g[0] - s[0]);
                    let (sa, ca) = axis.sin_cos();
                    [
                        (s[0] + g[0]) / 2.0 + ca * ex - sa * ey,
                        (s[1] + g[1]) / 2.0 + sa * ex + ca * ey,
                    ]
                }
            };
            let heading = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let pose = Pose2::new(p[0], p[1], heading);
            if !collision_check(self.scene, &pose, r) {
                return Some(pose);
            }
        }
        None
    }

    fn prune(&mut self, c_max: f64) {
        let s = self.verts[0];
        let g = self.verts[1];
        for i in 2..self.verts.len() {
            if self.alive[i] && s.distance_to(&self.verts[i]) + self.verts[i].distance_to(&g) > c_max {
                self.alive[i] = false;
            }
        }
    }

    fn to_path(&self, seq: &[usize]) -> PlannedPath {
        let segments = seq
            .windows(2)
            .flat_map(|w| self.edge_segments(w[0], w[1]))
            .collect();
        PlannedPath::from_segments(self.verts[0], segments, self.target, &self.cfg.weights)
    }
}

/// Plans from `start` to `goal` for a disc of `radius`, returning the
/// cheapest path found within the budget.
pub fn plan(
    scene: &Scene,
    start: &Pose2,
    goal: &Pose2,
    radius: f64,
    target_center: [f64; 2],
    cfg: &PlannerConfig,
    seed: u64,
) -> Result<PlannedPath, PlanError> {
    cfg.validate()?;
    if collision_check(scene, start, radius) {
        return Err(PlanError::InvalidEndpoint(format!("start {start:?} in collision")));
    }
    if collision_check(scene, goal, radius) {
        return Err(PlanError::InvalidEndpoint(format!("goal {goal:?} in collision")));
    }
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut map = Roadmap {
        scene,
        radius,
        target: target_center,
        cfg,
        verts: vec![*start, *goal],
        alive: vec![true, true],
        neighbors: Vec::new(),
        cost_cache: EdgeCache::default(),
        valid_cache: EdgeCache::default(),
    };
    map.rebuild_neighbors();
    let mut best: Option<PlannedPath> = map.search().map(|(_, seq)| map.to_path(&seq));
    let straight = start.distance_to(goal);
    let mut batch = 0usize;
    loop {
        let more = match cfg.budget {
            Budget::Iterations(n) => batch < n,
            Budget::Seconds(s) => t0.elapsed().as_secs_f64() < s,
        };
        if !more {
            break;
        }
        batch += 1;
        let c_max = best.as_ref().map(|p| p.cost / cfg.weights.w_translate);
        if let Some(c) = c_max {
            if c <= straight + 1e-9 {
                // No sample can shorten a path already at the straight-line bound.
                break;
            }
            map.prune(c);
        }
        for _ in 0..cfg.batch_size {
            if let Some(p) = map.sample_free(&mut rng, c_max) {
                map.verts.push(p);
                map.alive.push(true);
            }
        }
        map.rebuild_neighbors();
        if let Some((_, seq)) = map.search() {
            let cand = map.to_path(&seq);
            if best.as_ref().is_none_or(|b| cand.cost < b.cost) {
                best = Some(cand);
            }
        }
    }
    log::debug!(
        "plan: {} batches, {} vertices, cost {:?}",
        batch,
        map.verts.len(),
        best.as_ref().map(|p| p.cost)
    );
    best.ok_or(PlanError::NoPathFound)
}
