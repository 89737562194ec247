//! Discrete-event store environment.
//!
//! Customers arrive at the entrance as a Poisson process, walk shortest
//! paths between the products on their lists, spend a service time at each
//! product and leave through an exit. Online orders arrive as a second
//! Poisson process and queue FIFO for the single picker.
//!
//! The picker decides on node arrival. [`Env::step`] moves it across one
//! edge, lets customers and arrivals evolve for the traversal time, and then
//! counts customers on the new node and on its neighbors. The reward is
//! `-w_step*steps - w_same*same_node - w_visible*visible + w_pick*picks`.
//!
//! Customer and order streams are generated period by period from their own
//! substreams, independent of anything the picker does.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{validate, NodeId, RouteTable, StoreGraph};
use crate::instance::{sample_shopping_list, Concentration, ConcentrationProfile};
use crate::rng::{substream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    /// Penalty per arc traversed.
    pub step: f64,
    /// Penalty per customer on the picker's node.
    pub same_node: f64,
    /// Penalty per customer on a node adjacent to the picker.
    pub visible: f64,
    /// Reward per product picked.
    pub pick: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { step: 1.0, same_node: 3.0, visible: 1.0, pick: 100.0 }
    }
}

impl RewardWeights {
    pub fn reward(&self, phi: &Phi) -> f64 {
        -self.step * phi.steps as f64 - self.same_node * phi.same_node as f64 - self.visible * phi.visible as f64
            + self.pick * phi.picks as f64
    }
}

/// Reward components observed at one decision epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phi {
    pub steps: u32,
    pub same_node: u32,
    pub visible: u32,
    pub picks: u32,
}

impl Phi {
    pub fn encounters(&self) -> u32 {
        self.same_node + self.visible
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    /// Customer arrivals per period.
    pub lambda_store: f64,
    /// Online orders per period.
    pub lambda_online: f64,
    /// Length of the rate period in seconds.
    pub period: f64,
    /// Opening time in seconds; no arrivals and no new orders after it.
    pub open_time: f64,
    pub store_capacity: usize,
    /// Customers allowed on one node; `None` disables the cap.
    pub node_capacity: Option<usize>,
    pub customer_speed: f64,
    pub picker_speed: f64,
    pub customer_service_time: f64,
    pub picker_service_time: f64,
    pub reward_weights: RewardWeights,
    pub max_order_size: usize,
    pub max_list_size: usize,
    pub concentration: Concentration,
    /// Extra time allowed after closing to finish the order in progress
    /// before the episode is cut off.
    pub overtime_limit: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            lambda_store: 2.0,
            lambda_online: 0.2,
            period: 60.0,
            open_time: 8.0 * 3600.0,
            store_capacity: 50,
            node_capacity: Some(5),
            customer_speed: 1.0,
            picker_speed: 1.0,
            customer_service_time: 30.0,
            picker_service_time: 30.0,
            reward_weights: RewardWeights::default(),
            max_order_size: 10,
            max_list_size: 10,
            concentration: Concentration::Entrance,
            overtime_limit: 3600.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.lambda_store >= 0.0 && self.lambda_online >= 0.0) {
            return bad("arrival rates must be non-negative");
        }
        if !(self.period > 0.0 && self.open_time > 0.0) {
            return bad("period and open_time must be positive");
        }
        if self.store_capacity < 1 || self.node_capacity == Some(0) {
            return bad("capacities must be at least 1");
        }
        if !(self.customer_speed > 0.0 && self.picker_speed > 0.0) {
            return bad("speeds must be positive");
        }
        if !(self.customer_service_time >= 0.0 && self.picker_service_time >= 0.0 && self.overtime_limit >= 0.0) {
            return bad("service times and overtime must be non-negative");
        }
        let w = self.reward_weights;
        if !(w.step >= 0.0 && w.same_node >= 0.0 && w.visible >= 0.0 && w.pick >= 0.0) {
            return bad("reward weights must be non-negative");
        }
        if self.max_order_size < 1 || self.max_list_size < 1 {
            return bad("order and list sizes must be at least 1");
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Orders the picking locations of one order.
pub trait Sequencer: Send + Sync {
    fn sequence(&self, picks: &[NodeId]) -> Result<Vec<NodeId>>;
}

impl Sequencer for crate::srp::SrpSequencer {
    fn sequence(&self, picks: &[NodeId]) -> Result<Vec<NodeId>> {
        crate::srp::SrpSequencer::sequence(self, picks)
    }
}

impl<F> Sequencer for F
where
    F: Fn(&[NodeId]) -> Result<Vec<NodeId>> + Send + Sync,
{
    fn sequence(&self, picks: &[NodeId]) -> Result<Vec<NodeId>> {
        self(picks)
    }
}

/// Immutable per-layout data shared by every environment on that layout.
#[derive(Debug)]
pub struct Store {
    pub graph: StoreGraph,
    pub routes: RouteTable,
    pub profile: ConcentrationProfile,
    pub order_profile: ConcentrationProfile,
    pub prep: NodeId,
    pub exits: Vec<NodeId>,
}

impl Store {
    pub fn new(graph: StoreGraph, concentration: Concentration) -> Result<Arc<Self>> {
        let report = validate(&graph);
        if !report.is_empty() {
            let msgs: Vec<String> = report.iter().map(|v| v.to_string()).collect();
            return Err(Error::InvalidLayout(msgs.join("; ")));
        }
        if graph.product_nodes().is_empty() {
            return Err(Error::InvalidLayout("no product positions".into()));
        }
        let routes = RouteTable::distances(&graph);
        let profile = ConcentrationProfile::new(&graph, &routes, concentration);
        let order_profile = ConcentrationProfile::uniform(&graph);
        let prep = graph.prep_zone().expect("validated");
        let exits = graph.exits();
        Ok(Arc::new(Self { graph, routes, profile, order_profile, prep, exits }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Customer {
    pub id: usize,
    /// Entrance, shortest-path legs through every product, exit.
    pub shopping_path: Vec<NodeId>,
    /// Whether the customer picks at the matching path position.
    pub picks_at: Vec<bool>,
    pub path_cursor: usize,
    pub current_node: NodeId,
    /// When the customer next tries to move.
    pub busy_until: f64,
    pub waiting: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineOrder {
    pub id: usize,
    pub picking_locations: Vec<NodeId>,
    pub arrival_time: f64,
    pub sequence: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
struct ActiveOrder {
    order: OnlineOrder,
    /// Index into `order.sequence` of the next target; `len` means the prep zone.
    cursor: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct PendingCustomer {
    time: f64,
    list: Vec<NodeId>,
    exit: NodeId,
}

/// Pre-drawn Poisson arrivals, generated one period at a time.
#[derive(Debug, Clone)]
struct ArrivalStream<T> {
    rng: ChaCha8Rng,
    next_period: u64,
    buffer: VecDeque<T>,
}

impl<T> ArrivalStream<T> {
    fn new(rng: ChaCha8Rng) -> Self {
        Self { rng, next_period: 0, buffer: VecDeque::new() }
    }
}

#[derive(Debug, Clone, Copy)]
enum EventKind {
    Arrival,
    Move(usize),
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

/// What the picker sees at a decision epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub picker: NodeId,
    pub target: NodeId,
    pub co_located: u32,
    /// Customers on each neighbor, in neighbor-id order.
    pub neighbors: Vec<(NodeId, u32)>,
    pub clock: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub from: NodeId,
    pub action: NodeId,
    /// Target in force when the action was chosen.
    pub target: NodeId,
    pub phi: Phi,
    pub reward: f64,
    pub done: bool,
    /// Clock at arrival on `action`.
    pub arrival_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub t: f64,
    pub node: NodeId,
    pub action: NodeId,
    pub phi1: u32,
    pub phi2: u32,
    pub phi3: u32,
    pub phi4: u32,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTotals {
    pub reward: f64,
    pub steps: u64,
    pub same_node: u64,
    pub visible: u64,
    pub products: u64,
    pub orders: u64,
}

impl EpisodeTotals {
    pub fn encounters(&self) -> u64 {
        self.same_node + self.visible
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CustomerCounters {
    pub generated: u64,
    pub admitted: u64,
    pub rejected: u64,
    pub departed: u64,
}

pub struct Env {
    store: Arc<Store>,
    config: EnvConfig,
    sequencer: Arc<dyn Sequencer>,
    clock: f64,
    picker: NodeId,
    active: Option<ActiveOrder>,
    queue: VecDeque<OnlineOrder>,
    customers: Vec<Option<Customer>>,
    in_store: usize,
    occupancy: Vec<u32>,
    waiters: Vec<VecDeque<usize>>,
    events: BinaryHeap<Event>,
    pending_customers: VecDeque<PendingCustomer>,
    pending_orders: VecDeque<OnlineOrder>,
    customer_stream: ArrivalStream<PendingCustomer>,
    order_stream: ArrivalStream<OnlineOrder>,
    next_seq: u64,
    next_order_id: usize,
    counters: CustomerCounters,
    totals: EpisodeTotals,
    epoch: usize,
    done: bool,
    truncated: bool,
    record: bool,
    trace: Vec<TraceRow>,
}

impl Env {
    pub fn new(store: Arc<Store>, config: EnvConfig, sequencer: Arc<dyn Sequencer>) -> Result<Self> {
        config.validate()?;
        let n = store.graph.node_count();
        let prep = store.prep;
        Ok(Self {
            store,
            config,
            sequencer,
            clock: 0.0,
            picker: prep,
            active: None,
            queue: VecDeque::new(),
            customers: Vec::new(),
            in_store: 0,
            occupancy: vec![0; n],
            waiters: vec![VecDeque::new(); n],
            events: BinaryHeap::new(),
            pending_customers: VecDeque::new(),
            pending_orders: VecDeque::new(),
            customer_stream: ArrivalStream::new(substream(0, Stream::Customers)),
            order_stream: ArrivalStream::new(substream(0, Stream::Orders)),
            next_seq: 0,
            next_order_id: 0,
            counters: CustomerCounters::default(),
            totals: EpisodeTotals::default(),
            epoch: 0,
            done: false,
            truncated: false,
            record: false,
            trace: Vec::new(),
        })
    }

    /// Keep a per-epoch trace of the following episodes.
    pub fn set_recording(&mut self, on: bool) {
        self.record = on;
    }

    pub fn set_sequencer(&mut self, sequencer: Arc<dyn Sequencer>) {
        self.sequencer = sequencer;
    }

    /// Initial state: clock 0, picker at the prep zone, empty store and queue.
    pub fn reset(&mut self, seed: u64) {
        self.clock = 0.0;
        self.picker = self.store.prep;
        self.active = None;
        self.queue.clear();
        self.customers.clear();
        self.in_store = 0;
        self.occupancy.iter_mut().for_each(|o| *o = 0);
        self.waiters.iter_mut().for_each(|w| w.clear());
        self.events.clear();
        self.pending_customers.clear();
        self.pending_orders.clear();
        self.customer_stream = ArrivalStream::new(substream(seed, Stream::Customers));
        self.order_stream = ArrivalStream::new(substream(seed, Stream::Orders));
        self.next_seq = 0;
        self.next_order_id = 0;
        self.counters = CustomerCounters::default();
        self.totals = EpisodeTotals::default();
        self.epoch = 0;
        self.done = false;
        self.truncated = false;
        self.trace.clear();
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn graph(&self) -> &StoreGraph {
        &self.store.graph
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn picker_node(&self) -> NodeId {
        self.picker
    }

    pub fn target(&self) -> Option<NodeId> {
        self.active.as_ref().map(|a| a.order.sequence.get(a.cursor).copied().unwrap_or(self.store.prep))
    }

    /// Picked flags of the active order, aligned with its picking sequence.
    pub fn picking_status(&self) -> Vec<bool> {
        match &self.active {
            Some(a) => (0..a.order.sequence.len()).map(|i| i < a.cursor).collect(),
            None => Vec::new(),
        }
    }

    pub fn active_order(&self) -> Option<&OnlineOrder> {
        self.active.as_ref().map(|a| &a.order)
    }

    pub fn queue(&self) -> &VecDeque<OnlineOrder> {
        &self.queue
    }

    pub fn customers(&self) -> impl Iterator<Item = &Customer> {
        self.customers.iter().flatten()
    }

    pub fn customers_in_store(&self) -> usize {
        self.in_store
    }

    pub fn occupancy(&self) -> &[u32] {
        &self.occupancy
    }

    pub fn counters(&self) -> CustomerCounters {
        self.counters
    }

    pub fn totals(&self) -> EpisodeTotals {
        self.totals
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Whether the episode was cut off with an order still in progress.
    pub fn was_truncated(&self) -> bool {
        self.truncated
    }

    // ---------------------------------------------------------------------
    // arrivals

    fn fill_customers_until(&mut self, t: f64) {
        let lambda = self.config.lambda_store;
        while (self.customer_stream.next_period as f64) * self.config.period <= t
            && (self.customer_stream.next_period as f64) * self.config.period < self.config.open_time
        {
            let k = self.customer_stream.next_period;
            self.customer_stream.next_period += 1;
            if lambda <= 0.0 {
                continue;
            }
            let rng = &mut self.customer_stream.rng;
            let count = Poisson::new(lambda).expect("positive rate").sample(rng) as usize;
            let mut batch: Vec<PendingCustomer> = (0..count)
                .map(|_| {
                    let time = (k as f64 + rng.random::<f64>()) * self.config.period;
                    let list = sample_shopping_list(&self.store.profile, self.config.max_list_size, rng);
                    let exit = self.store.exits[rng.random_range(0..self.store.exits.len())];
                    PendingCustomer { time, list, exit }
                })
                .collect();
            batch.sort_by(|a, b| a.time.total_cmp(&b.time));
            self.counters.generated += batch.iter().filter(|c| c.time < self.config.open_time).count() as u64;
            self.customer_stream.buffer.extend(batch.into_iter().filter(|c| c.time < self.config.open_time));
        }
    }

    fn fill_orders_until(&mut self, t: f64) {
        let lambda = self.config.lambda_online;
        while (self.order_stream.next_period as f64) * self.config.period <= t
            && (self.order_stream.next_period as f64) * self.config.period < self.config.open_time
        {
            let k = self.order_stream.next_period;
            self.order_stream.next_period += 1;
            if lambda <= 0.0 {
                continue;
            }
            let rng = &mut self.order_stream.rng;
            let count = Poisson::new(lambda).expect("positive rate").sample(rng) as usize;
            let mut batch: Vec<(f64, Vec<NodeId>)> = (0..count)
                .map(|_| {
                    let time = (k as f64 + rng.random::<f64>()) * self.config.period;
                    (time, sample_shopping_list(&self.store.order_profile, self.config.max_order_size, rng))
                })
                .collect();
            batch.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (time, picks) in batch {
                if time < self.config.open_time {
                    let id = self.next_order_id;
                    self.next_order_id += 1;
                    self.order_stream.buffer.push_back(OnlineOrder {
                        id,
                        picking_locations: picks,
                        arrival_time: time,
                        sequence: Vec::new(),
                    });
                }
            }
        }
    }

    /// Draws the customer and order arrivals of `(clock, clock + dt]` and
    /// queues them; they take effect as the clock passes their arrival times.
    pub fn spawn_arrivals(&mut self, dt: f64) {
        let until = self.clock + dt;
        self.fill_customers_until(until);
        self.fill_orders_until(until);
        while self.customer_stream.buffer.front().is_some_and(|c| c.time <= until) {
            let c = self.customer_stream.buffer.pop_front().unwrap();
            let seq = self.bump_seq();
            self.events.push(Event { time: c.time, seq, kind: EventKind::Arrival });
            self.pending_customers.push_back(c);
        }
        while self.order_stream.buffer.front().is_some_and(|o| o.arrival_time <= until) {
            let o = self.order_stream.buffer.pop_front().unwrap();
            self.pending_orders.push_back(o);
        }
    }

    /// Time of the next order arrival before closing, if any.
    fn next_order_time(&mut self) -> Option<f64> {
        if let Some(o) = self.pending_orders.front() {
            return Some(o.arrival_time);
        }
        loop {
            if let Some(o) = self.order_stream.buffer.front() {
                return Some(o.arrival_time);
            }
            let start = self.order_stream.next_period as f64 * self.config.period;
            if start >= self.config.open_time || self.config.lambda_online <= 0.0 {
                return None;
            }
            self.fill_orders_until(start);
        }
    }

    fn bump_seq(&mut self) -> u64 {
        self.next_seq += 1;
        self.next_seq
    }

    // ---------------------------------------------------------------------
    // customer movement

    /// Processes customer events up to `clock + dt` and advances the clock.
    pub fn advance_customers(&mut self, dt: f64) {
        let until = self.clock + dt;
        while self.events.peek().is_some_and(|e| e.time <= until) {
            let ev = self.events.pop().unwrap();
            match ev.kind {
                EventKind::Arrival => {
                    let c = self.pending_customers.pop_front().expect("arrival event has a customer");
                    self.admit(c);
                }
                EventKind::Move(id) => self.try_move(id, ev.time),
            }
        }
        while self.pending_orders.front().is_some_and(|o| o.arrival_time <= until) {
            let o = self.pending_orders.pop_front().unwrap();
            self.queue.push_back(o);
        }
        self.clock = until;
    }

    fn node_full(&self, node: NodeId) -> bool {
        self.config.node_capacity.is_some_and(|m| self.occupancy[node.idx()] as usize >= m)
    }

    fn admit(&mut self, c: PendingCustomer) {
        let entrance = self.store.graph.entrance();
        if self.in_store >= self.config.store_capacity || self.node_full(entrance) || c.list.is_empty() {
            self.counters.rejected += 1;
            return;
        }
        let routes = &self.store.routes;
        let graph = &self.store.graph;
        let mut path = vec![entrance];
        let mut picks_at = vec![false];
        for stop in c.list.iter().copied().chain(std::iter::once(c.exit)) {
            let leg = routes.path(graph, *path.last().unwrap(), stop).expect("validated layout is connected");
            for &n in &leg[1..] {
                path.push(n);
                picks_at.push(false);
            }
            if stop != c.exit {
                *picks_at.last_mut().unwrap() = true;
            }
        }
        let id = self.customers.len();
        self.customers.push(Some(Customer {
            id,
            shopping_path: path,
            picks_at,
            path_cursor: 0,
            current_node: entrance,
            busy_until: c.time,
            waiting: false,
        }));
        self.occupancy[entrance.idx()] += 1;
        self.in_store += 1;
        self.counters.admitted += 1;
        let seq = self.bump_seq();
        self.events.push(Event { time: c.time, seq, kind: EventKind::Move(id) });
    }

    /// The customer is done at its current node and sets off for the next
    /// one, which it occupies while walking there. A full next node makes it
    /// wait where it is; leaving the exit takes it out of the store.
    fn try_move(&mut self, id: usize, t: f64) {
        let cust = self.customers[id].as_ref().expect("live customer");
        let from = cust.current_node;
        let next_idx = cust.path_cursor + 1;
        if next_idx == cust.shopping_path.len() {
            self.customers[id] = None;
            self.occupancy[from.idx()] -= 1;
            self.in_store -= 1;
            self.counters.departed += 1;
            self.wake(from, t);
            return;
        }
        let next = cust.shopping_path[next_idx];
        if self.node_full(next) {
            self.customers[id].as_mut().unwrap().waiting = true;
            self.waiters[next.idx()].push_back(id);
            return;
        }
        self.occupancy[from.idx()] -= 1;
        self.occupancy[next.idx()] += 1;
        let walk = self.store.graph.edge_length(from, next).unwrap_or(0.0) / self.config.customer_speed;
        let cust = self.customers[id].as_mut().unwrap();
        let dwell = if cust.picks_at[next_idx] { self.config.customer_service_time } else { 0.0 };
        cust.waiting = false;
        cust.path_cursor = next_idx;
        cust.current_node = next;
        cust.busy_until = t + walk + dwell;
        let at = cust.busy_until;
        let seq = self.bump_seq();
        self.events.push(Event { time: at, seq, kind: EventKind::Move(id) });
        self.wake(from, t);
    }

    fn wake(&mut self, node: NodeId, t: f64) {
        if let Some(w) = self.waiters[node.idx()].pop_front() {
            let seq = self.bump_seq();
            self.events.push(Event { time: t, seq, kind: EventKind::Move(w) });
        }
    }

    fn elapse(&mut self, dt: f64) {
        if dt > 0.0 {
            self.spawn_arrivals(dt);
            self.advance_customers(dt);
        }
    }

    // ---------------------------------------------------------------------
    // orders and the picker

    /// Pops the oldest queued order and sequences it. No-op unless the picker
    /// is idle at the prep zone with a non-empty queue.
    pub fn assign_next_order(&mut self) -> Result<()> {
        let seq = Arc::clone(&self.sequencer);
        self.assign_next_order_with(&*seq)
    }

    pub fn assign_next_order_with(&mut self, sequencer: &dyn Sequencer) -> Result<()> {
        if self.active.is_some() || self.picker != self.store.prep {
            return Ok(());
        }
        let Some(mut order) = self.queue.pop_front() else { return Ok(()) };
        let sequence = sequencer.sequence(&order.picking_locations)?;
        let mut a = sequence.clone();
        let mut b = order.picking_locations.clone();
        a.sort();
        b.sort();
        if a != b {
            return Err(Error::Contract(format!(
                "sequence {:?} is not a permutation of order {} locations",
                sequence, order.id
            )));
        }
        order.sequence = sequence;
        self.active = Some(ActiveOrder { order, cursor: 0 });
        Ok(())
    }

    /// Brings the episode to the next decision epoch: assigns queued orders
    /// to an idle picker, waits for new ones, or ends the episode.
    fn settle(&mut self) -> Result<()> {
        loop {
            if self.done {
                return Ok(());
            }
            if self.active.is_some() {
                if self.clock >= self.config.open_time + self.config.overtime_limit {
                    self.truncated = true;
                    self.done = true;
                }
                return Ok(());
            }
            if self.clock >= self.config.open_time {
                self.done = true;
                return Ok(());
            }
            if !self.queue.is_empty() {
                self.assign_next_order()?;
                continue;
            }
            let next = self.next_order_time().unwrap_or(self.config.open_time).min(self.config.open_time);
            let dt = (next - self.clock).max(0.0);
            if dt > 0.0 {
                self.elapse(dt);
            } else {
                // order arriving exactly now
                self.spawn_arrivals(0.0);
                self.advance_customers(0.0);
                if self.queue.is_empty() {
                    self.elapse(f64::EPSILON.max(self.clock * f64::EPSILON));
                }
            }
        }
    }

    /// The current decision epoch, or `None` once the episode is over.
    pub fn observe(&mut self) -> Result<Option<Observation>> {
        self.settle()?;
        if self.done {
            return Ok(None);
        }
        Ok(Some(self.observation()))
    }

    fn observation(&self) -> Observation {
        let g = &self.store.graph;
        Observation {
            picker: self.picker,
            target: self.target().expect("active order"),
            co_located: self.occupancy[self.picker.idx()],
            neighbors: g.neighbors(self.picker).iter().map(|&(n, _)| (n, self.occupancy[n.idx()])).collect(),
            clock: self.clock,
        }
    }

    fn visible_from(&self, node: NodeId) -> u32 {
        self.store.graph.neighbors(node).iter().map(|&(n, _)| self.occupancy[n.idx()]).sum()
    }

    /// Moves the picker to the adjacent node `action`.
    pub fn step(&mut self, action: NodeId) -> Result<StepOutcome> {
        self.settle()?;
        if self.done {
            return Err(Error::Contract("episode is over".into()));
        }
        let target = self.target().ok_or_else(|| Error::Contract("no active order".into()))?;
        let from = self.picker;
        let len = self
            .store
            .graph
            .edge_length(from, action)
            .ok_or(Error::IllegalAction { at: from, action })?;
        self.elapse(len / self.config.picker_speed);
        self.picker = action;
        let arrival_time = self.clock;
        let mut phi = Phi {
            steps: 1,
            same_node: self.occupancy[action.idx()],
            visible: self.visible_from(action),
            picks: 0,
        };
        let prep = self.store.prep;
        let active = self.active.as_mut().expect("checked above");
        if action == target && active.cursor < active.order.sequence.len() {
            phi.picks = 1;
            active.cursor += 1;
            self.elapse(self.config.picker_service_time);
        } else if action == prep && active.cursor == active.order.sequence.len() {
            self.active = None;
            self.totals.orders += 1;
        }
        let reward = self.config.reward_weights.reward(&phi);
        self.totals.reward += reward;
        self.totals.steps += phi.steps as u64;
        self.totals.same_node += phi.same_node as u64;
        self.totals.visible += phi.visible as u64;
        self.totals.products += phi.picks as u64;
        if self.record {
            self.trace.push(TraceRow {
                epoch: self.epoch,
                t: arrival_time,
                node: from,
                action,
                phi1: phi.steps,
                phi2: phi.same_node,
                phi3: phi.visible,
                phi4: phi.picks,
                reward,
            });
        }
        self.epoch += 1;
        self.settle()?;
        Ok(StepOutcome { from, action, target, phi, reward, done: self.done, arrival_time })
    }

    /// Runs customers only (no picker decisions) and returns the mean number
    /// of customers on each node, sampled every `interval` seconds.
    pub fn customer_occupancy_profile(&mut self, seed: u64, interval: f64) -> (Vec<f64>, usize) {
        self.reset(seed);
        let mut sums = vec![0.0; self.occupancy.len()];
        let mut samples = 0usize;
        while self.clock + interval <= self.config.open_time + 1e-9 {
            self.elapse(interval);
            for (s, &o) in sums.iter_mut().zip(&self.occupancy) {
                *s += o as f64;
            }
            samples += 1;
        }
        (sums, samples)
    }
}

pub fn cumulative_reward(trace: &[TraceRow]) -> f64 {
    trace.iter().map(|r| r.reward).sum()
}

pub fn write_trace_csv(trace: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("epoch,t,node,action,phi1,phi2,phi3,phi4,reward\n");
    for r in trace {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.epoch, r.t, r.node, r.action, r.phi1, r.phi2, r.phi3, r.phi4, r.reward
        ));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
