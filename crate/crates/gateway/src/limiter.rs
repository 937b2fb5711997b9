use std::sync::{Condvar, Mutex};

/// Counting semaphore that admits waiters strictly in arrival order.
pub struct FairLimiter {
    limit: usize,
    state: Mutex<LimiterState>,
    cond: Condvar,
}

#[derive(Default)]
struct LimiterState {
    next_ticket: u64,
    now_serving: u64,
    in_flight: usize,
}

pub struct Permit<'a> {
    limiter: &'a FairLimiter,
}

impl FairLimiter {
    pub fn new(limit: usize) -> Self {
        FairLimiter { limit: limit.max(1), state: Mutex::new(LimiterState::default()), cond: Condvar::new() }
    }

    pub fn limit(&self) -> usize {
        self.limit
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut st = self.state.lock().unwrap();
        let ticket = st.next_ticket;
        st.next_ticket += 1;
        while st.now_serving != ticket || st.in_flight >= self.limit {
            st = self.cond.wait(st).unwrap();
        }
        st.now_serving += 1;
        st.in_flight += 1;
        self.cond.notify_all();
        Permit { limiter: self }
    }

    pub fn in_flight(&self) -> usize {
        self.state.lock().unwrap().in_flight
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut st = self.limiter.state.lock().unwrap();
        st.in_flight -= 1;
        self.limiter.cond.notify_all();
    }
}
