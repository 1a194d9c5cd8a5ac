use std::collections::{BTreeSet, VecDeque};

use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BusError {
    #[error("node {0} is not attached to this bus")]
    NotMember(u32),
    #[error("node {0} already holds or awaits the bus")]
    DuplicateRequest(u32),
    #[error("node {node} released the bus but the owner is {owner:?}")]
    NotOwner { node: u32, owner: Option<u32> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusGrant {
    GrantedNow,
    Enqueued,
}

/// Exclusive-access command bus shared by the radios of one master.
///
/// At most one node owns the bus; everyone else waits in strict FIFO order.
#[derive(Debug, Clone, PartialEq)]
pub struct BusState {
    members: BTreeSet<u32>,
    owner: Option<u32>,
    queue: VecDeque<u32>,
    owned_since: Option<SimTime>,
    busy_until: Option<SimTime>,
}

impl BusState {
    pub fn new(members: impl IntoIterator<Item = u32>) -> Self {
        BusState {
            members: members.into_iter().collect(),
            owner: None,
            queue: VecDeque::new(),
            owned_since: None,
            busy_until: None,
        }
    }

    pub fn owner(&self) -> Option<u32> {
        self.owner
    }

    pub fn queue(&self) -> impl Iterator<Item = u32> + '_ {
        self.queue.iter().copied()
    }

    pub fn owned_since(&self) -> Option<SimTime> {
        self.owned_since
    }

    pub fn busy_until(&self) -> Option<SimTime> {
        self.busy_until
    }

    /// Records when the current owner is expected to let go.
    pub fn set_busy_until(&mut self, until: SimTime) {
        self.busy_until = Some(until);
    }

    pub fn bus_request(&mut self, node: u32, now: SimTime) -> Result<BusGrant, BusError> {
        if !self.members.contains(&node) {
            return Err(BusError::NotMember(node));
        }
        if self.owner == Some(node) || self.queue.contains(&node) {
            return Err(BusError::DuplicateRequest(node));
        }
        if self.owner.is_none() {
            self.grant(node, now);
            Ok(BusGrant::GrantedNow)
        } else {
            self.queue.push_back(node);
            Ok(BusGrant::Enqueued)
        }
    }

    /// Releases the bus and hands it to the head of the queue, if any, at the
    /// same instant.
    pub fn bus_release(&mut self, node: u32, now: SimTime) -> Result<Option<u32>, BusError> {
        if self.owner != Some(node) {
            return Err(BusError::NotOwner { node, owner: self.owner });
        }
        self.owner = None;
        self.owned_since = None;
        self.busy_until = None;
        let next = self.queue.pop_front();
        if let Some(n) = next {
            self.grant(n, now);
        }
        Ok(next)
    }

    fn grant(&mut self, node: u32, now: SimTime) {
        self.owner = Some(node);
        self.owned_since = Some(now);
    }
}
