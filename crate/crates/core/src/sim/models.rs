//! Queue models seen as event generators.

use super::{SimEvent, SimModel, Step};
use crate::closed::tandem::tandem_step_detailed;
use crate::closed::{ClosedQueue, QueueIndex, TandemNetwork, TandemState};
use crate::dynamics::complete;
use crate::error::{Error, Result};
use crate::model::{check_classes, ClassId, PandsQueue, State};
use crate::rate::RateModel;

/// Open queue whose arrivals are blocked at `capacity` customers.
#[derive(Debug, Clone)]
pub struct OpenModel {
    pub queue: PandsQueue,
    pub capacity: usize,
}

impl SimModel for OpenModel {
    type State = State;

    fn n_classes(&self) -> usize {
        self.queue.n_classes()
    }

    fn initial(&self) -> State {
        State::empty()
    }

    fn events(&self, c: &State, out: &mut Vec<(SimEvent, f64)>) -> Result<()> {
        if c.len() < self.capacity {
            for (i, &l) in self.queue.arrival_rates.iter().enumerate() {
                out.push((
                    SimEvent::Arrival {
                        class: ClassId::new(i),
                    },
                    l,
                ));
            }
        }
        push_completions(&self.queue.rate_fn.increments(c)?, QueueIndex::First, out);
        Ok(())
    }

    fn apply(&self, c: &State, e: SimEvent) -> Result<Step<State>> {
        match e {
            SimEvent::Arrival { class } => {
                let mut next = c.clone();
                next.push(class);
                Ok(Step {
                    next,
                    chain: Vec::new(),
                    served: None,
                    departing: None,
                })
            }
            SimEvent::Completion { position, .. } => {
                let o = complete(&self.queue.swapping, c, position)?;
                Ok(Step {
                    next: o.next_state,
                    chain: o.swap_chain,
                    served: Some(c[position]),
                    departing: Some(o.departing_class),
                })
            }
        }
    }
}

fn push_completions(incs: &[f64], queue: QueueIndex, out: &mut Vec<(SimEvent, f64)>) {
    for (p, &r) in incs.iter().enumerate() {
        if r > 0.0 {
            out.push((SimEvent::Completion { queue, position: p }, r));
        }
    }
}

/// Closed queue: the departing customer rejoins the tail.
#[derive(Debug, Clone)]
pub struct ClosedModel {
    pub queue: ClosedQueue,
    pub initial: State,
}

impl ClosedModel {
    pub fn new(queue: ClosedQueue, initial: State) -> Result<Self> {
        check_classes(&initial, queue.n_classes())?;
        if initial.macrostate(queue.n_classes()) != queue.population {
            return Err(Error::Usage(format!(
                "initial state {initial} does not have the queue's population"
            )));
        }
        Ok(ClosedModel { queue, initial })
    }
}

impl SimModel for ClosedModel {
    type State = State;

    fn n_classes(&self) -> usize {
        self.queue.n_classes()
    }

    fn initial(&self) -> State {
        self.initial.clone()
    }

    fn events(&self, c: &State, out: &mut Vec<(SimEvent, f64)>) -> Result<()> {
        push_completions(&self.queue.rate_fn.increments(c)?, QueueIndex::First, out);
        Ok(())
    }

    fn apply(&self, c: &State, e: SimEvent) -> Result<Step<State>> {
        let SimEvent::Completion { position, .. } = e else {
            return Err(Error::Usage("closed queues have no arrivals".into()));
        };
        let o = complete(&self.queue.swapping, c, position)?;
        let mut next = o.next_state;
        next.push(o.departing_class);
        Ok(Step {
            next,
            chain: o.swap_chain,
            served: Some(c[position]),
            departing: Some(o.departing_class),
        })
    }
}

#[derive(Debug, Clone)]
pub struct TandemModel {
    pub net: TandemNetwork,
    pub initial: TandemState,
}

impl TandemModel {
    pub fn new(net: TandemNetwork, initial: TandemState) -> Result<Self> {
        check_classes(&initial.first, net.n_classes())?;
        check_classes(&initial.second, net.n_classes())?;
        if initial.macrostate(net.n_classes()) != net.population {
            return Err(Error::Usage(format!(
                "initial state {initial} does not have the network population"
            )));
        }
        Ok(TandemModel { net, initial })
    }
}

impl SimModel for TandemModel {
    type State = TandemState;

    fn n_classes(&self) -> usize {
        self.net.n_classes()
    }

    fn initial(&self) -> TandemState {
        self.initial.clone()
    }

    fn events(&self, s: &TandemState, out: &mut Vec<(SimEvent, f64)>) -> Result<()> {
        for q in [QueueIndex::First, QueueIndex::Second] {
            push_completions(&self.net.rate_fn(q).increments(s.queue(q))?, q, out);
        }
        Ok(())
    }

    fn apply(&self, s: &TandemState, e: SimEvent) -> Result<Step<TandemState>> {
        let SimEvent::Completion { queue, position } = e else {
            return Err(Error::Usage("tandem networks have no arrivals".into()));
        };
        let (next, o) = tandem_step_detailed(&self.net, s, queue, position)?;
        Ok(Step {
            next,
            chain: o.swap_chain,
            served: Some(s.queue(queue)[position]),
            departing: Some(o.departing_class),
        })
    }

    fn two_queues(&self) -> bool {
        true
    }
}
