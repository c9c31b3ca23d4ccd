//! One OS thread per tile, exchanging halo strips over channels.

use std::sync::mpsc::{channel, Receiver, Sender};
use std::panic::{self, AssertUnwindSafe};
use std::thread;
use std::time::Instant;

use floodsim_core::kernel::{exchanged_field, Phase};
use floodsim_core::ledger::StepFlows;
use floodsim_core::schedule::Schedule;
use floodsim_core::subdomain::{GlobalFields, HaloExchange, Subdomain};
use floodsim_core::{HaloPacket, Side, State, Topology};

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct Link {
    tx: Sender<HaloPacket>,
    rx: Receiver<HaloPacket>,
}

/// Channel-backed [`HaloExchange`] for one worker.
///
/// Sides are visited W, E, N, S; on each side the border strip is sent before
/// the neighbour's strip is received. Both ends follow the same order and
/// channels are unbounded, so an exchange cannot deadlock.
#[derive(Debug)]
pub struct ChannelExchange {
    id: usize,
    links: [Option<Link>; 4],
    exchange_ns: u64,
}

impl ChannelExchange {
    /// Wires every tile of `topo` to its neighbours.
    pub fn mesh(topo: &Topology) -> Vec<ChannelExchange> {
        let mut ex: Vec<ChannelExchange> = topo
            .tiles
            .iter()
            .map(|t| ChannelExchange {
                id: t.id,
                links: Default::default(),
                exchange_ns: 0,
            })
            .collect();
        for tile in &topo.tiles {
            for side in [Side::East, Side::South] {
                if let Some(n) = tile.neighbor(side) {
                    let (a_tx, b_rx) = channel();
                    let (b_tx, a_rx) = channel();
                    ex[tile.id].links[side.index()] = Some(Link { tx: a_tx, rx: a_rx });
                    ex[n].links[side.opposite().index()] = Some(Link { tx: b_tx, rx: b_rx });
                }
            }
        }
        ex
    }

    pub fn id(&self) -> usize {
        self.id
    }

    /// Wall time spent inside exchanges since the last call.
    pub fn take_exchange_ns(&mut self) -> u64 {
        std::mem::take(&mut self.exchange_ns)
    }

    /// Tells every neighbour to stop waiting on this worker.
    pub fn abort(&self) {
        for side in Side::ALL {
            if let Some(link) = &self.links[side.index()] {
                let _ = link.tx.send(HaloPacket::abort(self.id, side));
            }
        }
    }

    fn exchange_sides(&mut self, state: &mut State, phase: Phase, level: u64) -> floodsim_core::Result<()> {
        for side in Side::ALL {
            let Some(link) = &self.links[side.index()] else {
                continue;
            };
            let field = exchanged_field(phase, side);
            let packet = HaloPacket {
                source: self.id,
                side,
                field,
                step: level,
                payload: state.border_strip(field, side),
            };
            let aborted = floodsim_core::Error::HaloAborted { side };
            link.tx.send(packet).map_err(|_| aborted.clone())?;
            let got = link.rx.recv().map_err(|_| aborted)?;
            got.check(side, field, level, state.strip_len(field, side))?;
            state.set_ghost(field, side, &got.payload)?;
        }
        Ok(())
    }
}

impl HaloExchange for ChannelExchange {
    fn exchange(&mut self, state: &mut State, phase: Phase, level: u64) -> floodsim_core::Result<()> {
        let t0 = Instant::now();
        let res = self.exchange_sides(state, phase, level);
        self.exchange_ns += t0.elapsed().as_nanos() as u64;
        res
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WorkerTiming {
    /// Step wall time outside exchanges.
    pub compute_ns: u64,
    pub exchange_ns: u64,
    pub steps: u64,
}

impl WorkerTiming {
    /// Exchange share of step wall time, percent.
    pub fn exchange_pct(&self) -> f64 {
        let total = self.compute_ns + self.exchange_ns;
        if total == 0 {
            0.0
        } else {
            100.0 * self.exchange_ns as f64 / total as f64
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Advance {
    /// Flows summed over all tiles and steps of this advance.
    pub flows: StepFlows,
    /// Indexed by worker id.
    pub timings: Vec<WorkerTiming>,
}

impl Advance {
    /// Timings summed over workers.
    pub fn total_timing(&self) -> WorkerTiming {
        self.timings.iter().fold(WorkerTiming::default(), |a, t| WorkerTiming {
            compute_ns: a.compute_ns + t.compute_ns,
            exchange_ns: a.exchange_ns + t.exchange_ns,
            steps: a.steps.max(t.steps),
        })
    }

    /// Mean over workers of each worker's exchange share.
    pub fn mean_exchange_pct(&self) -> f64 {
        if self.timings.is_empty() {
            return 0.0;
        }
        self.timings.iter().map(WorkerTiming::exchange_pct).sum::<f64>() / self.timings.len() as f64
    }
}

/// Worker pool holding the decomposed state between advances.
#[derive(Debug)]
pub struct Pool {
    topo: Topology,
    subs: Vec<Subdomain>,
    links: Vec<ChannelExchange>,
    level: u64,
    primed: bool,
    poisoned: bool,
}

impl Pool {
    pub fn new(topo: Topology, subs: Vec<Subdomain>) -> Self {
        assert_eq!(topo.workers(), subs.len(), "one subdomain per tile");
        let links = ChannelExchange::mesh(&topo);
        Self {
            topo,
            subs,
            links,
            level: 0,
            primed: false,
            poisoned: false,
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn subdomains(&self) -> &[Subdomain] {
        &self.subs
    }

    /// Time level the state currently sits at.
    pub fn level(&self) -> u64 {
        self.level
    }

    /// Runs every step from the current level up to `to_level`.
    pub fn advance(&mut self, schedule: &Schedule, to_level: u64) -> Result<Advance> {
        if self.poisoned {
            return Err(Error::PoolPoisoned);
        }
        let from = self.level;
        let to = to_level.min(schedule.steps());
        let prime = !self.primed;
        let results: Vec<thread::Result<floodsim_core::Result<(StepFlows, WorkerTiming)>>> =
            thread::scope(|s| {
                let handles: Vec<_> = self
                    .subs
                    .iter_mut()
                    .zip(self.links.iter_mut())
                    .map(|(sub, ex)| s.spawn(move || run_worker(sub, ex, schedule, from, to, prime)))
                    .collect();
                handles.into_iter().map(|h| h.join()).collect()
            });

        let mut out = Advance::default();
        let mut root: Option<Error> = None;
        let mut aborted: Option<Error> = None;
        for (id, res) in results.into_iter().enumerate() {
            match res {
                Ok(Ok((flows, timing))) => {
                    out.flows += flows;
                    out.timings.push(timing);
                }
                Ok(Err(e @ floodsim_core::Error::HaloAborted { .. })) => {
                    aborted.get_or_insert(e.into());
                }
                Ok(Err(e)) => {
                    root.get_or_insert(e.into());
                }
                Err(_) => {
                    root.get_or_insert(Error::WorkerPanic(id));
                }
            }
        }
        if let Some(e) = root.or(aborted) {
            self.poisoned = true;
            return Err(e);
        }
        self.primed = true;
        self.level = to.max(from);
        Ok(out)
    }

    /// Advances one step and returns its timing split.
    pub fn timed_step(&mut self, schedule: &Schedule) -> Result<Advance> {
        let next = self.level + 1;
        self.advance(schedule, next)
    }

    pub fn fields(&self) -> GlobalFields {
        GlobalFields::gather(&self.topo, self.subs.iter().map(|s| (&s.tile, &s.state)))
    }

    /// Stored water over all tiles, m³.
    pub fn volume(&self) -> f64 {
        self.subs.iter().map(Subdomain::volume).sum()
    }
}

/// Step length as fed to the kernel: the configured step, except the
/// truncated final one.
pub fn kernel_dt(schedule: &Schedule, k: u64) -> f32 {
    if k + 1 < schedule.steps() {
        schedule.dt() as f32
    } else {
        schedule.step_len(k) as f32
    }
}

/// Runs one worker's share of an advance. Any failure, including a panic,
/// is announced to the neighbours so that none of them blocks forever.
fn run_worker(
    sub: &mut Subdomain,
    ex: &mut ChannelExchange,
    schedule: &Schedule,
    from: u64,
    to: u64,
    prime: bool,
) -> floodsim_core::Result<(StepFlows, WorkerTiming)> {
    let res = panic::catch_unwind(AssertUnwindSafe(|| steps(sub, ex, schedule, from, to, prime)));
    match res {
        Ok(Ok(v)) => Ok(v),
        Ok(Err(e)) => {
            ex.abort();
            Err(e)
        }
        Err(payload) => {
            ex.abort();
            panic::resume_unwind(payload)
        }
    }
}

fn steps(
    sub: &mut Subdomain,
    ex: &mut ChannelExchange,
    schedule: &Schedule,
    from: u64,
    to: u64,
    prime: bool,
) -> floodsim_core::Result<(StepFlows, WorkerTiming)> {
    if prime {
        sub.prime(ex, from)?;
    }
    ex.take_exchange_ns();
    let mut flows = StepFlows::default();
    let t0 = Instant::now();
    for k in from..to {
        flows += sub.step(ex, k, schedule.time_at(k), kernel_dt(schedule, k))?;
    }
    let total = t0.elapsed().as_nanos() as u64;
    let exchange_ns = ex.take_exchange_ns();
    Ok((
        flows,
        WorkerTiming {
            compute_ns: total.saturating_sub(exchange_ns),
            exchange_ns,
            steps: to.saturating_sub(from),
        },
    ))
}
