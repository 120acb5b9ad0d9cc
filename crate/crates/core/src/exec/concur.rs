//! ConcurExecute: worker orchestration and the exchange fabrics.
//!
//! Exchange-free bodies run sequentially (reference) or on a bounded rayon
//! pool (parallel). Bodies that exchange data get one lane per worker: real
//! threads joined by channels on the parallel backend, and on the reference
//! backend threads that hand a single baton around in worker-index order so
//! that exactly one of them runs at a time.

use std::collections::VecDeque;
use std::sync::mpsc::{channel, Receiver, Sender};
use std::sync::{Condvar, Mutex};

use crate::flavors::control;
use crate::ir::{CollectionValue, ItemType, Program, Value};

use super::ops::{self, collection, runtime};
use super::{Backend, ExecError, Fabric, Machine, Shared, Worker};

impl<'a, 'r> Machine<'a, 'r> {
    pub(super) fn concur_execute(
        &self,
        body: &Program,
        input: &CollectionValue,
        out: &ItemType,
    ) -> Result<Value, ExecError> {
        let part_ty = body.params[0].ty.clone();
        let (_, elem) = ops::out_parts(&part_ty);
        let args: Vec<Value> = input
            .elements()
            .iter()
            .map(|e| Value::single(elem.clone(), e.clone()))
            .collect();
        let n = args.len();
        let exchanges = body.any_instruction(&|i| i.is(control::NAME, control::EXCHANGE));
        let results = match (exchanges, self.shared.backend) {
            (true, Backend::Reference) => run_baton(self.shared, body, args),
            (true, Backend::Parallel { .. }) => run_channels(self.shared, body, args),
            (false, Backend::Parallel { worker_cap }) => {
                run_pooled(self.shared, body, args, worker_cap)
            }
            (false, Backend::Reference) => args
                .into_iter()
                .enumerate()
                .map(|(i, a)| run_worker(self.shared, body, i, n, None, a))
                .collect(),
        };
        ops::make(out, first_error(results)?)
    }
}

fn run_worker(
    shared: &Shared<'_>,
    body: &Program,
    index: usize,
    count: usize,
    fabric: Option<&dyn Fabric>,
    arg: Value,
) -> Result<Value, ExecError> {
    let m = Machine {
        shared,
        worker: Some(Worker {
            index,
            count,
            fabric,
        }),
    };
    let res = m.execute(body, vec![arg])?;
    let single = collection(&res[0])?;
    single
        .elements()
        .first()
        .cloned()
        .ok_or_else(|| runtime("ConcurExecute body returned an empty Single"))
}

/// A worker failure can leave its peers waiting for data that never comes;
/// the original failure is more useful than their deadlock reports.
fn first_error(results: Vec<Result<Value, ExecError>>) -> Result<Vec<Value>, ExecError> {
    let mut deadlock = None;
    let mut values = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(v) => values.push(v),
            Err(ExecError::DeadlockDetected) => deadlock = Some(ExecError::DeadlockDetected),
            Err(e) => return Err(e),
        }
    }
    match deadlock {
        Some(e) => Err(e),
        None => Ok(values),
    }
}

#[cfg(feature = "parallel")]
fn pool(threads: usize) -> std::sync::Arc<rayon::ThreadPool> {
    use std::collections::HashMap;
    use std::sync::{Arc, OnceLock};
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS
        .get_or_init(Default::default)
        .lock()
        .expect("pool cache");
    pools
        .entry(threads)
        .or_insert_with(|| {
            Arc::new(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .thread_name(|i| format!("cvm-worker-{i}"))
                    .build()
                    .expect("thread pool"),
            )
        })
        .clone()
}

#[cfg(feature = "parallel")]
fn run_pooled(
    shared: &Shared<'_>,
    body: &Program,
    args: Vec<Value>,
    cap: usize,
) -> Vec<Result<Value, ExecError>> {
    use rayon::prelude::*;
    let n = args.len();
    if cap <= 1 || n <= 1 {
        return args
            .into_iter()
            .enumerate()
            .map(|(i, a)| run_worker(shared, body, i, n, None, a))
            .collect();
    }
    pool(cap).install(|| {
        args.into_par_iter()
            .enumerate()
            .map(|(i, a)| run_worker(shared, body, i, n, None, a))
            .collect()
    })
}

#[cfg(not(feature = "parallel"))]
fn run_pooled(
    shared: &Shared<'_>,
    body: &Program,
    args: Vec<Value>,
    _cap: usize,
) -> Vec<Result<Value, ExecError>> {
    let n = args.len();
    args.into_iter()
        .enumerate()
        .map(|(i, a)| run_worker(shared, body, i, n, None, a))
        .collect()
}

fn join_all<T>(handles: Vec<std::thread::ScopedJoinHandle<'_, T>>) -> Vec<T> {
    handles
        .into_iter()
        .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
        .collect()
}

struct ChannelEndpoint {
    /// Indexed by destination.
    senders: Vec<Sender<Vec<Value>>>,
    /// Indexed by source.
    receivers: Vec<Receiver<Vec<Value>>>,
}

impl Fabric for ChannelEndpoint {
    fn exchange(&self, batches: Vec<Vec<Value>>) -> Result<Vec<Vec<Value>>, ExecError> {
        for (tx, b) in self.senders.iter().zip(batches) {
            // A finished destination never reads again.
            let _ = tx.send(b);
        }
        // A source that has exited without sending will never send.
        self.receivers
            .iter()
            .map(|rx| rx.recv().map_err(|_| ExecError::DeadlockDetected))
            .collect()
    }
}

fn run_channels(
    shared: &Shared<'_>,
    body: &Program,
    args: Vec<Value>,
) -> Vec<Result<Value, ExecError>> {
    let n = args.len();
    let mut senders: Vec<Vec<Sender<Vec<Value>>>> = (0..n).map(|_| Vec::with_capacity(n)).collect();
    let mut receivers: Vec<Vec<Receiver<Vec<Value>>>> =
        (0..n).map(|_| Vec::with_capacity(n)).collect();
    for dst in 0..n {
        for src_senders in senders.iter_mut() {
            let (tx, rx) = channel();
            src_senders.push(tx);
            receivers[dst].push(rx);
        }
    }
    let endpoints = senders
        .into_iter()
        .zip(receivers)
        .map(|(senders, receivers)| ChannelEndpoint { senders, receivers });
    std::thread::scope(|s| {
        let handles = endpoints
            .zip(args)
            .enumerate()
            .map(|(i, (ep, arg))| {
                std::thread::Builder::new()
                    .name(format!("cvm-exchange-{i}"))
                    .spawn_scoped(s, move || run_worker(shared, body, i, n, Some(&ep), arg))
                    .expect("spawn worker")
            })
            .collect();
        join_all(handles)
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Ready,
    Waiting(usize),
    Done,
}

struct BatonState {
    turn: usize,
    status: Vec<Status>,
    /// `mail[dst][src]`: batches in send order.
    mail: Vec<Vec<VecDeque<Vec<Value>>>>,
    /// Set on deadlock or when a worker fails; every waiter then stops.
    halted: bool,
}

impl BatonState {
    fn runnable(&self, w: usize) -> bool {
        match self.status[w] {
            Status::Ready => true,
            Status::Waiting(src) => !self.mail[w][src].is_empty(),
            Status::Done => false,
        }
    }

    /// Hands the baton to the next runnable worker after `from`, or halts
    /// when live workers remain but none can make progress.
    fn pass(&mut self, from: usize) {
        let n = self.status.len();
        match (1..=n).map(|k| (from + k) % n).find(|&w| self.runnable(w)) {
            Some(w) => self.turn = w,
            None => {
                if self.status.iter().any(|s| *s != Status::Done) {
                    self.halted = true;
                }
            }
        }
    }
}

struct Baton {
    state: Mutex<BatonState>,
    cv: Condvar,
}

impl Baton {
    fn wait_turn<'g>(
        &self,
        mut g: std::sync::MutexGuard<'g, BatonState>,
        me: usize,
    ) -> Result<std::sync::MutexGuard<'g, BatonState>, ExecError> {
        while g.turn != me && !g.halted {
            g = self.cv.wait(g).expect("baton lock");
        }
        if g.halted {
            return Err(ExecError::DeadlockDetected);
        }
        Ok(g)
    }

    fn finish(&self, me: usize, failed: bool) {
        let mut g = self.state.lock().expect("baton lock");
        g.status[me] = Status::Done;
        if failed {
            g.halted = true;
        } else if g.turn == me {
            g.pass(me);
        }
        self.cv.notify_all();
    }
}

struct BatonEndpoint<'b> {
    baton: &'b Baton,
    me: usize,
}

impl Fabric for BatonEndpoint<'_> {
    fn exchange(&self, batches: Vec<Vec<Value>>) -> Result<Vec<Vec<Value>>, ExecError> {
        let me = self.me;
        let mut g = self.baton.state.lock().expect("baton lock");
        for (dst, b) in batches.into_iter().enumerate() {
            g.mail[dst][me].push_back(b);
        }
        let n = g.status.len();
        let mut received = Vec::with_capacity(n);
        for src in 0..n {
            loop {
                if let Some(b) = g.mail[me][src].pop_front() {
                    received.push(b);
                    break;
                }
                g.status[me] = Status::Waiting(src);
                g.pass(me);
                self.baton.cv.notify_all();
                g = self.baton.wait_turn(g, me)?;
                g.status[me] = Status::Ready;
            }
        }
        Ok(received)
    }
}

fn run_baton(
    shared: &Shared<'_>,
    body: &Program,
    args: Vec<Value>,
) -> Vec<Result<Value, ExecError>> {
    let n = args.len();
    let baton = Baton {
        state: Mutex::new(BatonState {
            turn: 0,
            status: vec![Status::Ready; n],
            mail: (0..n)
                .map(|_| (0..n).map(|_| VecDeque::new()).collect())
                .collect(),
            halted: false,
        }),
        cv: Condvar::new(),
    };
    let baton = &baton;
    std::thread::scope(|s| {
        let handles = args
            .into_iter()
            .enumerate()
            .map(|(i, arg)| {
                std::thread::Builder::new()
                    .name(format!("cvm-coop-{i}"))
                    .spawn_scoped(s, move || {
                        let started = baton
                            .wait_turn(baton.state.lock().expect("baton lock"), i)
                            .map(drop);
                        let res = started.and_then(|()| {
                            let ep = BatonEndpoint { baton, me: i };
                            run_worker(shared, body, i, n, Some(&ep), arg)
                        });
                        baton.finish(i, res.is_err());
                        res
                    })
                    .expect("spawn worker")
            })
            .collect();
        join_all(handles)
    })
}
