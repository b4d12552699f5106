//! Banked memory with per-bank round-robin arbitration over Fetch Tags.
//!
//! A bank serves one granted request at a time: the response arrives
//! `latency + ceil(words / words_per_cycle)` cycles after the grant, and the
//! next waiting requester (scanning round-robin from the last granted tag)
//! is granted when the current request completes. Requests are never
//! dropped; contention only stalls.

use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemReqKind {
    /// Stage-1 prefetch: the neighbor ID list of a node.
    Adjacency,
    /// Stage-2 prefetch: one neighbor's feature embedding.
    Feature { neighbor_index: usize },
    /// Updated feature row written back after transformation.
    WriteBack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemRequest {
    pub slot: usize,
    pub kind: MemReqKind,
    pub words: u64,
}

#[derive(Debug)]
struct Bank {
    in_service: Option<MemRequest>,
    /// Waiting requests per group-local tag; each tag keeps at most one
    /// outstanding request, extras queue behind it.
    waiting: Vec<VecDeque<MemRequest>>,
    rr_cursor: usize,
}

#[derive(Debug)]
pub struct MemorySystem {
    banks: Vec<Bank>,
    tags_per_bank: usize,
    latency: u64,
    words_per_cycle: u64,
    pub conflicts: u64,
    pub words_requested: u64,
    pub words_delivered: u64,
}

impl MemorySystem {
    pub fn new(num_banks: usize, tags_per_bank: usize, latency: u64, words_per_cycle: u64) -> Self {
        MemorySystem {
            banks: (0..num_banks)
                .map(|_| Bank {
                    in_service: None,
                    waiting: vec![VecDeque::new(); tags_per_bank],
                    rr_cursor: 0,
                })
                .collect(),
            tags_per_bank,
            latency,
            words_per_cycle,
            conflicts: 0,
            words_requested: 0,
            words_delivered: 0,
        }
    }

    fn local_tag(&self, slot: usize) -> usize {
        slot % self.tags_per_bank
    }

    pub fn service_cycles(&self, words: u64) -> u64 {
        self.latency + words.div_ceil(self.words_per_cycle)
    }

    /// Submits a request; returns the completion cycle if the bank granted it
    /// immediately, or `None` if it queued behind other traffic.
    pub fn request(&mut self, bank: usize, req: MemRequest, now: u64) -> Option<u64> {
        self.words_requested += req.words;
        let tag = self.local_tag(req.slot);
        let bank_state = &mut self.banks[bank];
        if bank_state.in_service.is_none() {
            bank_state.in_service = Some(req);
            bank_state.rr_cursor = tag;
            Some(now + self.service_cycles(req.words))
        } else {
            self.conflicts += 1;
            bank_state.waiting[tag].push_back(req);
            None
        }
    }

    /// Completes the in-service request of `bank` and grants the next one
    /// round-robin. Returns the finished request and, if another was granted,
    /// its completion cycle.
    pub fn complete(&mut self, bank: usize, now: u64) -> (MemRequest, Option<(MemRequest, u64)>) {
        let done = self.banks[bank]
            .in_service
            .take()
            .expect("completion without an in-service request");
        self.words_delivered += done.words;

        let tags = self.tags_per_bank;
        let start = self.banks[bank].rr_cursor;
        let mut granted = None;
        for offset in 1..=tags {
            let tag = (start + offset) % tags;
            if let Some(req) = self.banks[bank].waiting[tag].pop_front() {
                self.banks[bank].in_service = Some(req);
                self.banks[bank].rr_cursor = tag;
                granted = Some((req, now + self.service_cycles(req.words)));
                break;
            }
        }
        (done, granted)
    }

    pub fn idle(&self) -> bool {
        self.banks
            .iter()
            .all(|b| b.in_service.is_none() && b.waiting.iter().all(VecDeque::is_empty))
    }
}
