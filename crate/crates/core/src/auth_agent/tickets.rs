use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, SystemTime};

use rand::RngCore;

/// Single-use capability handed out after a successful login and spent by
/// the protected endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionTicket {
    pub ticket_id: String,
    pub user_id: String,
    pub issued_at: SystemTime,
    pub ttl: Duration,
    pub consumed: bool,
}

impl SessionTicket {
    pub fn is_live(&self, now: SystemTime) -> bool {
        !self.consumed && now < self.issued_at + self.ttl
    }
}

#[derive(Debug, Default)]
pub(crate) struct TicketBook {
    live: Mutex<HashMap<String, SessionTicket>>,
}

impl TicketBook {
    pub fn issue(&self, user_id: &str, ttl: Duration, now: SystemTime) -> SessionTicket {
        let mut id = [0u8; 16];
        rand::rng().fill_bytes(&mut id);
        let ticket = SessionTicket {
            ticket_id: hex::encode(id),
            user_id: user_id.to_string(),
            issued_at: now,
            ttl,
            consumed: false,
        };
        let mut live = self.live.lock().unwrap();
        live.retain(|_, t| t.is_live(now));
        live.insert(ticket.ticket_id.clone(), ticket.clone());
        ticket
    }

    /// Consumes the ticket; `None` if absent, expired, or already spent.
    pub fn redeem(&self, ticket_id: &str, now: SystemTime) -> Option<String> {
        let mut live = self.live.lock().unwrap();
        let ticket = live.remove(ticket_id)?;
        ticket.is_live(now).then_some(ticket.user_id)
    }

    pub fn revoke_user(&self, user_id: &str) {
        self.live
            .lock()
            .unwrap()
            .retain(|_, t| t.user_id != user_id);
    }
}
