//! Reschedulable event calendar for the simulator.
//!
//! A binary heap holds (date, priority, insertion-sequence) keys; slots hold
//! the payloads. Rescheduling bumps the slot's generation counter and pushes
//! a fresh key, so stale keys are skipped on pop. Pops therefore come out in
//! non-decreasing date order, lower priority first at equal dates, and FIFO
//! by insertion among full ties.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventHandle {
    slot: usize,
    gen: u64,
}

#[derive(Debug, Clone, Copy)]
struct HeapKey {
    date: f64,
    prio: u8,
    seq: u64,
    slot: usize,
    gen: u64,
}

impl PartialEq for HeapKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap and we want the earliest first.
        other
            .date
            .total_cmp(&self.date)
            .then_with(|| other.prio.cmp(&self.prio))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Slot<T> {
    gen: u64,
    live: bool,
    payload: Option<T>,
}

pub struct EventCalendar<T> {
    heap: BinaryHeap<HeapKey>,
    slots: Vec<Slot<T>>,
    free: Vec<usize>,
    seq: u64,
    live: usize,
    last_popped: f64,
}

impl<T> Default for EventCalendar<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> EventCalendar<T> {
    pub fn new() -> Self {
        EventCalendar {
            heap: BinaryHeap::new(),
            slots: Vec::new(),
            free: Vec::new(),
            seq: 0,
            live: 0,
            last_popped: f64::NEG_INFINITY,
        }
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    /// Schedules `payload` at `date`. Lower `prio` pops first among equal
    /// dates; equal (date, prio) pops in insertion order.
    pub fn schedule(&mut self, date: f64, prio: u8, payload: T) -> EventHandle {
        assert!(date.is_finite(), "event date must be finite, got {date}");
        let slot = match self.free.pop() {
            Some(s) => {
                let entry = &mut self.slots[s];
                entry.gen += 1;
                entry.live = true;
                entry.payload = Some(payload);
                s
            }
            None => {
                self.slots.push(Slot {
                    gen: 0,
                    live: true,
                    payload: Some(payload),
                });
                self.slots.len() - 1
            }
        };
        let gen = self.slots[slot].gen;
        self.push_key(date, prio, slot, gen);
        self.live += 1;
        EventHandle { slot, gen }
    }

    /// Moves a live event to a new date atomically (the old date can no
    /// longer be popped). Returns the refreshed handle.
    pub fn reschedule(&mut self, handle: EventHandle, date: f64, prio: u8) -> EventHandle {
        assert!(date.is_finite(), "event date must be finite, got {date}");
        let slot = &mut self.slots[handle.slot];
        assert!(
            slot.live && slot.gen == handle.gen,
            "reschedule of a dead event handle"
        );
        slot.gen += 1;
        let gen = slot.gen;
        self.push_key(date, prio, handle.slot, gen);
        EventHandle {
            slot: handle.slot,
            gen,
        }
    }

    /// Removes a live event; its payload is dropped.
    pub fn cancel(&mut self, handle: EventHandle) {
        let slot = &mut self.slots[handle.slot];
        assert!(
            slot.live && slot.gen == handle.gen,
            "cancel of a dead event handle"
        );
        slot.live = false;
        slot.payload = None;
        self.free.push(handle.slot);
        self.live -= 1;
    }

    /// Earliest live event, in non-decreasing date order across calls.
    pub fn pop(&mut self) -> Option<(f64, T)> {
        while let Some(key) = self.heap.pop() {
            let slot = &mut self.slots[key.slot];
            if !slot.live || slot.gen != key.gen {
                continue; // superseded by reschedule or cancel
            }
            debug_assert!(
                key.date >= self.last_popped,
                "calendar regressed from {} to {}",
                self.last_popped,
                key.date
            );
            self.last_popped = key.date;
            slot.live = false;
            let payload = slot.payload.take().expect("live slot has payload");
            self.free.push(key.slot);
            self.live -= 1;
            return Some((key.date, payload));
        }
        None
    }

    fn push_key(&mut self, date: f64, prio: u8, slot: usize, gen: u64) {
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(HeapKey {
            date,
            prio,
            seq,
            slot,
            gen,
        });
    }
}
