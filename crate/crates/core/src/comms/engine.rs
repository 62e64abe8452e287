use std::sync::mpsc::{channel, RecvTimeoutError, Sender};
use std::sync::{Barrier, Mutex};
use std::time::Duration;

use super::{CommError, CommSchedule};

/// Solution component carried by a message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    U,
    V,
}

const TAGS: [Tag; 2] = [Tag::U, Tag::V];

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub from: usize,
    pub to: usize,
    pub round: usize,
    pub tag: Tag,
    pub payload: Vec<f64>,
}

/// Record of a delivered message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Delivery {
    pub round: usize,
    pub from: usize,
    pub to: usize,
    pub tag: Tag,
    pub len: usize,
}

/// A participant of the exchange.
pub trait Endpoint: Send {
    /// Values this node sends to `peer`.
    fn pack(&self, peer: usize, tag: Tag) -> Vec<f64>;
    /// Stores values received from `peer`.
    fn unpack(&mut self, peer: usize, tag: Tag, payload: &[f64]) -> Result<(), CommError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExchangeMode {
    /// All pairs handled in order on the calling thread.
    Sequential,
    /// One thread per node, channels between them and a barrier after each
    /// round; a receive waiting longer than `timeout` fails.
    Threaded { timeout: Duration },
}

impl ExchangeMode {
    pub fn threaded() -> Self {
        Self::Threaded {
            timeout: Duration::from_secs(30),
        }
    }
}

/// Runs the rounds of `schedule` over `nodes`; node `k` is `nodes[k]`.
///
/// Returns the delivery log sorted by round, sender, receiver and tag.
pub fn run_exchange<E: Endpoint>(
    nodes: &mut [E],
    schedule: &CommSchedule,
    mode: ExchangeMode,
) -> Result<Vec<Delivery>, CommError> {
    for (r, round) in schedule.rounds.iter().enumerate() {
        for e in round {
            if e.j >= nodes.len() {
                return Err(CommError::InvalidSchedule(format!(
                    "round {} refers to node {} but only {} nodes exist",
                    r + 1,
                    e.j + 1,
                    nodes.len()
                )));
            }
        }
    }
    let mut log = match mode {
        ExchangeMode::Sequential => sequential(nodes, schedule)?,
        ExchangeMode::Threaded { timeout } => threaded(nodes, schedule, timeout)?,
    };
    log.sort();
    Ok(log)
}

fn sequential<E: Endpoint>(nodes: &mut [E], schedule: &CommSchedule) -> Result<Vec<Delivery>, CommError> {
    let mut log = Vec::new();
    for (r, round) in schedule.rounds.iter().enumerate() {
        for e in round {
            for tag in TAGS {
                let a = nodes[e.i].pack(e.j, tag);
                let b = nodes[e.j].pack(e.i, tag);
                log.push(Delivery { round: r, from: e.i, to: e.j, tag, len: a.len() });
                log.push(Delivery { round: r, from: e.j, to: e.i, tag, len: b.len() });
                nodes[e.j].unpack(e.i, tag, &a)?;
                nodes[e.i].unpack(e.j, tag, &b)?;
            }
        }
    }
    Ok(log)
}

fn threaded<E: Endpoint>(
    nodes: &mut [E],
    schedule: &CommSchedule,
    timeout: Duration,
) -> Result<Vec<Delivery>, CommError> {
    let n = nodes.len();
    let (senders, receivers): (Vec<Sender<Message>>, Vec<_>) = (0..n).map(|_| channel()).unzip();
    let barrier = Barrier::new(n);
    let failed = Mutex::new(None::<CommError>);
    let logs: Vec<Vec<Delivery>> = std::thread::scope(|scope| {
        let handles: Vec<_> = nodes
            .iter_mut()
            .zip(receivers)
            .enumerate()
            .map(|(me, (node, rx))| {
                let senders = senders.clone();
                let barrier = &barrier;
                let failed = &failed;
                scope.spawn(move || {
                    let mut log = Vec::new();
                    for r in 0..schedule.n_rounds() {
                        let healthy = failed.lock().map(|f| f.is_none()).unwrap_or(false);
                        if healthy {
                            if let Some(peer) = schedule.peer(r, me) {
                                if let Err(e) = talk(node, me, peer, r, &senders, &rx, timeout, &mut log) {
                                    if let Ok(mut f) = failed.lock() {
                                        f.get_or_insert(e);
                                    }
                                }
                            }
                        }
                        barrier.wait();
                    }
                    log
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_default())
            .collect()
    });
    if let Some(e) = failed.into_inner().map_err(|_| CommError::WorkerPanic)? {
        return Err(e);
    }
    Ok(logs.into_iter().flatten().collect())
}

#[allow(clippy::too_many_arguments)]
fn talk<E: Endpoint>(
    node: &mut E,
    me: usize,
    peer: usize,
    round: usize,
    senders: &[Sender<Message>],
    rx: &std::sync::mpsc::Receiver<Message>,
    timeout: Duration,
    log: &mut Vec<Delivery>,
) -> Result<(), CommError> {
    for tag in TAGS {
        let payload = node.pack(peer, tag);
        // a closed channel only means the peer already gave up
        let _ = senders[peer].send(Message { from: me, to: peer, round, tag, payload });
    }
    let mut received = Vec::with_capacity(TAGS.len());
    while received.len() < TAGS.len() {
        match rx.recv_timeout(timeout) {
            Ok(msg) => {
                if msg.from != peer || msg.round != round || msg.to != me {
                    return Err(CommError::Protocol { from: msg.from, to: msg.to, round: msg.round });
                }
                received.push(msg);
            }
            Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => {
                return Err(CommError::Timeout { node: me, peer, round });
            }
        }
    }
    received.sort_by_key(|m| m.tag);
    for msg in received {
        log.push(Delivery { round, from: peer, to: me, tag: msg.tag, len: msg.payload.len() });
        node.unpack(peer, msg.tag, &msg.payload)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comms::{greedy_schedule, CommGraph, Edge};

    /// Node `k` owns slot `k` and keeps a copy of every other slot.
    #[derive(Debug, Clone)]
    struct Slots {
        me: usize,
        values: Vec<f64>,
        delay: Duration,
    }

    impl Endpoint for Slots {
        fn pack(&self, _peer: usize, tag: Tag) -> Vec<f64> {
            std::thread::sleep(self.delay);
            let v = self.values[self.me];
            vec![if tag == Tag::U { v } else { -v }]
        }

        fn unpack(&mut self, peer: usize, tag: Tag, payload: &[f64]) -> Result<(), CommError> {
            if payload.len() != 1 {
                return Err(CommError::PayloadLength { from: peer, to: self.me, expected: 1, got: payload.len() });
            }
            if tag == Tag::U {
                self.values[peer] = payload[0];
            }
            Ok(())
        }
    }

    fn nodes(n: usize) -> Vec<Slots> {
        (0..n)
            .map(|me| Slots {
                me,
                values: (0..n).map(|k| if k == me { me as f64 + 1.0 } else { 0.0 }).collect(),
                delay: Duration::ZERO,
            })
            .collect()
    }

    #[test]
    fn empty_schedule_is_noop() {
        let mut ns = nodes(3);
        let before: Vec<Vec<f64>> = ns.iter().map(|n| n.values.clone()).collect();
        let log = run_exchange(&mut ns, &CommSchedule::default(), ExchangeMode::threaded()).unwrap();
        assert!(log.is_empty());
        assert_eq!(before, ns.iter().map(|n| n.values.clone()).collect::<Vec<_>>());
    }

    #[test]
    fn loopback_pair() {
        for mode in [ExchangeMode::Sequential, ExchangeMode::threaded()] {
            let mut ns = nodes(2);
            let g = CommGraph::new(2, vec![Edge::new(0, 1, 2)]).unwrap();
            let log = run_exchange(&mut ns, &greedy_schedule(&g), mode).unwrap();
            assert_eq!(ns[0].values, vec![1.0, 2.0]);
            assert_eq!(ns[1].values, vec![1.0, 2.0]);
            assert_eq!(log.len(), 4);
        }
    }

    #[test]
    fn modes_agree() {
        let g = CommGraph::new(
            5,
            vec![Edge::new(0, 1, 1), Edge::new(1, 2, 3), Edge::new(2, 3, 2), Edge::new(0, 4, 5), Edge::new(1, 4, 1)],
        )
        .unwrap();
        let s = greedy_schedule(&g);
        let mut a = nodes(5);
        let mut b = nodes(5);
        let la = run_exchange(&mut a, &s, ExchangeMode::Sequential).unwrap();
        let lb = run_exchange(&mut b, &s, ExchangeMode::threaded()).unwrap();
        assert_eq!(la, lb);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values, y.values);
        }
    }

    #[test]
    fn watchdog_fires() {
        let mut ns = nodes(2);
        ns[1].delay = Duration::from_millis(400);
        let g = CommGraph::new(2, vec![Edge::new(0, 1, 1)]).unwrap();
        let mode = ExchangeMode::Threaded { timeout: Duration::from_millis(50) };
        assert!(matches!(
            run_exchange(&mut ns, &greedy_schedule(&g), mode),
            Err(CommError::Timeout { node: 0, .. })
        ));
    }

    #[test]
    fn unknown_node_rejected() {
        let mut ns = nodes(2);
        let s = CommSchedule { rounds: vec![vec![Edge::new(0, 2, 1)]] };
        assert!(run_exchange(&mut ns, &s, ExchangeMode::Sequential).is_err());
    }
}
