use crate::codec::Hash32;

/// Fate of one nonce in the reference model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonceStatus {
    Unverified,
    Verified(Hash32),
    Nil,
    Delivered,
    Cleared,
    Skipped,
    Burned,
}

/// Brute-force reference for one channel: a status per nonce and nothing
/// else. The anchor is recomputed from the statuses on every call.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelChannel {
    slots: Vec<NonceStatus>,
}

impl ModelChannel {
    pub fn status(&self, nonce: u64) -> NonceStatus {
        self.slots.get(nonce as usize - 1).copied().unwrap_or(NonceStatus::Unverified)
    }

    fn set(&mut self, nonce: u64, status: NonceStatus) {
        let i = nonce as usize - 1;
        if self.slots.len() <= i {
            self.slots.resize(i + 1, NonceStatus::Unverified);
        }
        self.slots[i] = status;
    }

    /// Highest delivered, cleared or skipped nonce.
    pub fn anchor(&self) -> u64 {
        (1..=self.slots.len() as u64)
            .rev()
            .find(|n| matches!(self.status(*n), NonceStatus::Delivered | NonceStatus::Cleared | NonceStatus::Skipped))
            .unwrap_or(0)
    }

    pub fn delivered(&self) -> Vec<u64> {
        (1..=self.slots.len() as u64).filter(|n| self.status(*n) == NonceStatus::Delivered).collect()
    }

    fn verified(&self, nonce: u64) -> bool {
        matches!(self.status(nonce), NonceStatus::Verified(_))
    }

    pub fn commit(&mut self, nonce: u64, hash: Hash32) -> Result<(), &'static str> {
        if nonce <= self.anchor() {
            return Err("StalePacket");
        }
        self.set(nonce, NonceStatus::Verified(hash));
        Ok(())
    }

    fn gate(&self, nonce: u64) -> Result<Hash32, &'static str> {
        let anchor = self.anchor();
        if nonce > anchor && !(anchor + 1..nonce).all(|m| self.verified(m)) {
            return Err("Censorship");
        }
        match self.status(nonce) {
            NonceStatus::Verified(h) => Ok(h),
            NonceStatus::Nil => Err("Nilified"),
            NonceStatus::Unverified if nonce > anchor => Err("Censorship"),
            _ => Err("AlreadyDelivered"),
        }
    }

    pub fn deliver(&mut self, nonce: u64, hash: Hash32) -> Result<(), &'static str> {
        if self.gate(nonce)? != hash {
            return Err("HashMismatch");
        }
        self.set(nonce, NonceStatus::Delivered);
        Ok(())
    }

    pub fn clear(&mut self, nonce: u64, hash: Hash32) -> Result<(), &'static str> {
        if self.gate(nonce)? != hash {
            return Err("HashMismatch");
        }
        self.set(nonce, NonceStatus::Cleared);
        Ok(())
    }

    pub fn skip(&mut self, nonce: u64) -> Result<(), &'static str> {
        let anchor = self.anchor();
        if nonce <= anchor || self.verified(nonce) || !(anchor + 1..nonce).all(|m| self.verified(m)) {
            return Err("WrongNonce");
        }
        self.set(nonce, NonceStatus::Skipped);
        Ok(())
    }

    pub fn nilify(&mut self, nonce: u64, expected: Hash32) -> Result<(), &'static str> {
        match self.status(nonce) {
            NonceStatus::Verified(h) if h != expected => Err("HashMismatch"),
            NonceStatus::Verified(_) => {
                self.set(nonce, NonceStatus::Nil);
                Ok(())
            }
            NonceStatus::Nil => Err("Nilified"),
            _ if nonce <= self.anchor() => Err("StalePacket"),
            _ => Err("NoEntry"),
        }
    }

    pub fn burn(&mut self, nonce: u64, expected: Hash32, nil: Hash32) -> Result<(), &'static str> {
        if nonce > self.anchor() {
            return Err("NonceAhead");
        }
        let stored = match self.status(nonce) {
            NonceStatus::Verified(h) => h,
            NonceStatus::Nil => nil,
            _ => return Err("NoEntry"),
        };
        if stored != expected {
            return Err("HashMismatch");
        }
        self.set(nonce, NonceStatus::Burned);
        Ok(())
    }
}
