//! The SMS-carried group-chat protocol: a human-readable wire format
//! multiplexed over ordinary SMS bodies plus the per-device session state
//! machine (invitation handshake, membership broadcast, nicknames, routing).
//!
//! Wire grammar (one SMS body, UTF-8):
//!
//! ```text
//! #GSC1|<code>|<KIND>|<nick>|<payload>[|<member-list>]
//! ```
//!
//! `KIND` is one of INV, ACC, REJ, CHT, MUP, LVE; the member list
//! (present exactly for INV/ACC/MUP) is a comma-separated sequence of
//! `address~nick` pairs. Literal `|`, `,`, `~` and `\` inside fields are
//! escaped as `\p`, `\c`, `\t` and `\\`. Bodies whose first field is not
//! the `#GSC1` version tag are not chat wires at all and fall through to
//! the normal-SMS pipeline.
//!
//! Membership control uses a star topology: the chat initiator is the sole
//! broadcaster of `MUP` membership snapshots, which avoids inconsistent
//! views under concurrent joins and leaves.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use thiserror::Error;

use crate::message::MAX_SMS_BYTES;

pub const WIRE_PREFIX: &str = "#GSC1";
pub const CHAT_CODE_LEN: usize = 8;
pub const MAX_NICK_CHARS: usize = 16;
const CODE_ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("malformed chat wire: {0}")]
    Malformed(String),
    #[error("encoded wire exceeds the {MAX_SMS_BYTES}-byte SMS cap")]
    TooLarge,
    #[error("wire violates a protocol invariant: {0}")]
    InvalidWire(String),
    #[error("no pending invite with code {0}")]
    NoSuchInvite(ChatCode),
    #[error("no session with code {0}")]
    NoSuchSession(ChatCode),
    #[error("session {0} is not active")]
    NotActive(ChatCode),
    #[error("a user decision only applies to an invitation wire")]
    DecisionWithoutInvite,
}

/// Unique identifier of one group chat: 8 characters over `[A-Z0-9]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChatCode(String);

impl ChatCode {
    pub fn parse(s: &str) -> Result<Self, ChatError> {
        if s.len() != CHAT_CODE_LEN || !s.bytes().all(|b| CODE_ALPHABET.contains(&b)) {
            return Err(ChatError::Malformed(format!("bad chat code '{s}'")));
        }
        Ok(ChatCode(s.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn random(rng: &mut impl Rng) -> Self {
        let value: String = (0..CHAT_CODE_LEN)
            .map(|_| CODE_ALPHABET[rng.gen_range(0..CODE_ALPHABET.len())] as char)
            .collect();
        ChatCode(value)
    }
}

impl std::fmt::Display for ChatCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireKind {
    Invite,
    Accept,
    Reject,
    Chat,
    MemberUpdate,
    Leave,
}

impl WireKind {
    fn tag(&self) -> &'static str {
        match self {
            WireKind::Invite => "INV",
            WireKind::Accept => "ACC",
            WireKind::Reject => "REJ",
            WireKind::Chat => "CHT",
            WireKind::MemberUpdate => "MUP",
            WireKind::Leave => "LVE",
        }
    }

    fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "INV" => WireKind::Invite,
            "ACC" => WireKind::Accept,
            "REJ" => WireKind::Reject,
            "CHT" => WireKind::Chat,
            "MUP" => WireKind::MemberUpdate,
            "LVE" => WireKind::Leave,
            _ => return None,
        })
    }

    /// INV, ACC and MUP carry a member list; the rest must not.
    pub fn carries_members(&self) -> bool {
        matches!(self, WireKind::Invite | WireKind::Accept | WireKind::MemberUpdate)
    }
}

/// One protocol frame as carried inside an SMS body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireChatMessage {
    pub code: ChatCode,
    pub kind: WireKind,
    /// Display name of the sender, at most 16 characters.
    pub sender_nick: String,
    pub payload: String,
    /// `(address, nick)` pairs; present exactly for INV/ACC/MUP.
    pub members: Option<Vec<(String, String)>>,
}

fn escape(field: &str) -> String {
    let mut out = String::with_capacity(field.len());
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\p"),
            ',' => out.push_str("\\c"),
            '~' => out.push_str("\\t"),
            other => out.push(other),
        }
    }
    out
}

fn unescape(field: &str) -> Result<String, ChatError> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('p') => out.push('|'),
            Some('c') => out.push(','),
            Some('t') => out.push('~'),
            Some(other) => {
                return Err(ChatError::Malformed(format!("unknown escape '\\{other}'")));
            }
            None => return Err(ChatError::Malformed("dangling escape".to_string())),
        }
    }
    Ok(out)
}

/// Serializes a frame into an SMS body. Fails if the frame violates the
/// protocol invariants or will not fit in one SMS.
pub fn encode(msg: &WireChatMessage) -> Result<String, ChatError> {
    if msg.sender_nick.chars().count() > MAX_NICK_CHARS {
        return Err(ChatError::InvalidWire(format!(
            "nick '{}' exceeds {MAX_NICK_CHARS} characters",
            msg.sender_nick
        )));
    }
    if msg.kind.carries_members() != msg.members.is_some() {
        return Err(ChatError::InvalidWire(format!(
            "{} wires must {} a member list",
            msg.kind.tag(),
            if msg.kind.carries_members() { "carry" } else { "not carry" }
        )));
    }
    let mut body = format!(
        "{WIRE_PREFIX}|{}|{}|{}|{}",
        msg.code.as_str(),
        msg.kind.tag(),
        escape(&msg.sender_nick),
        escape(&msg.payload)
    );
    if let Some(members) = &msg.members {
        body.push('|');
        let rendered: Vec<String> = members
            .iter()
            .map(|(addr, nick)| format!("{}~{}", escape(addr), escape(nick)))
            .collect();
        body.push_str(&rendered.join(","));
    }
    if body.len() > MAX_SMS_BYTES {
        return Err(ChatError::TooLarge);
    }
    Ok(body)
}

/// Result of inspecting an incoming SMS body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    /// Not a protocol frame — hand the SMS to the normal pipeline.
    NotChatWire,
    Wire(WireChatMessage),
}

/// Classifies an SMS body. Bodies whose first `|`-field is not the exact
/// version tag (including unknown protocol versions) are `NotChatWire`;
/// bodies that do carry the tag but fail the grammar are hard errors and
/// must be dropped by the caller, never shown in the inbox.
pub fn decode(body: &str) -> Result<Decoded, ChatError> {
    let fields: Vec<&str> = body.split('|').collect();
    if fields[0] != WIRE_PREFIX {
        return Ok(Decoded::NotChatWire);
    }
    if fields.len() < 5 {
        return Err(ChatError::Malformed(format!(
            "expected at least 5 fields, got {}",
            fields.len()
        )));
    }
    let code = ChatCode::parse(fields[1])?;
    let kind = WireKind::from_tag(fields[2])
        .ok_or_else(|| ChatError::Malformed(format!("unknown wire kind '{}'", fields[2])))?;
    let sender_nick = unescape(fields[3])?;
    if sender_nick.chars().count() > MAX_NICK_CHARS {
        return Err(ChatError::Malformed(format!(
            "nick exceeds {MAX_NICK_CHARS} characters"
        )));
    }
    let payload = unescape(fields[4])?;
    let expected_fields = if kind.carries_members() { 6 } else { 5 };
    if fields.len() != expected_fields {
        return Err(ChatError::Malformed(format!(
            "{} wire must have exactly {expected_fields} fields, got {}",
            kind.tag(),
            fields.len()
        )));
    }
    let members = if kind.carries_members() {
        let raw = fields[5];
        let mut list = Vec::new();
        if !raw.is_empty() {
            for pair in raw.split(',') {
                let mut halves = pair.split('~');
                let (Some(addr), Some(nick), None) = (halves.next(), halves.next(), halves.next())
                else {
                    return Err(ChatError::Malformed(format!("bad member pair '{pair}'")));
                };
                list.push((unescape(addr)?, unescape(nick)?));
            }
        }
        Some(list)
    } else {
        None
    };
    Ok(Decoded::Wire(WireChatMessage {
        code,
        kind,
        sender_nick,
        payload,
        members,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionState {
    /// Initiator waiting for the first acceptance.
    InvitePending,
    Active,
    Closed,
}

/// One chat as seen from a single device.
#[derive(Debug, Clone)]
pub struct ChatSession {
    pub code: ChatCode,
    pub self_nick: String,
    /// Remote members only: address -> nick.
    pub members: BTreeMap<String, String>,
    pub state: SessionState,
    /// Append-only (nick, text, timestamp) list shown in the chat window.
    pub transcript: Vec<(String, String, i64)>,
    /// This device started the chat and owns membership broadcasts.
    pub initiator: bool,
    /// For the initiator: invited addresses that have not answered yet.
    pub pending_invitees: BTreeSet<String>,
    /// For joined members: who to send control wires to.
    pub inviter: Option<String>,
}

impl ChatSession {
    /// The full membership view including this device, used for
    /// convergence checks and display.
    pub fn member_view(&self) -> BTreeMap<String, String> {
        let mut view = self.members.clone();
        view.insert(String::new(), String::new()); // placeholder removed below
        view.remove("");
        view
    }
}

/// A wire addressed to one peer, ready for the transport to encode and send.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutgoingWire {
    pub to: String,
    pub wire: WireChatMessage,
}

/// User response to a surfaced invitation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InviteDecision {
    Accept,
    Reject,
}

/// An invitation waiting for the user's decision.
#[derive(Debug, Clone)]
pub struct PendingInvite {
    pub code: ChatCode,
    pub inviter: String,
    pub inviter_nick: String,
    /// Membership snapshot carried by the invite.
    pub members: Vec<(String, String)>,
    pub received_at: i64,
}

/// Per-device chat state: sessions, pending invites and the seeded code
/// generator. All event handling is strictly sequential per device.
#[derive(Debug)]
pub struct ChatState {
    address: String,
    rng: rand_chacha::ChaCha8Rng,
    issued_codes: BTreeSet<ChatCode>,
    pub sessions: BTreeMap<ChatCode, ChatSession>,
    pub pending_invites: BTreeMap<ChatCode, PendingInvite>,
    /// Diagnostic log of dropped wires (unknown codes, malformed frames).
    pub drop_log: Vec<String>,
}

impl ChatState {
    pub fn new(address: impl Into<String>, seed: u64) -> Self {
        use rand::SeedableRng;
        let address = address.into();
        // Mix the address into the seed so every device draws an
        // independent, reproducible code stream.
        let mixed = seed ^ fnv1a(address.as_bytes());
        ChatState {
            address,
            rng: rand_chacha::ChaCha8Rng::seed_from_u64(mixed),
            issued_codes: BTreeSet::new(),
            sessions: BTreeMap::new(),
            pending_invites: BTreeMap::new(),
            drop_log: Vec::new(),
        }
    }

    pub fn address(&self) -> &str {
        &self.address
    }

    /// Draws a fresh chat code, re-drawing on the (unlikely) collision with
    /// a code this device already issued or participates in.
    pub fn generate_code(&mut self) -> ChatCode {
        loop {
            let code = ChatCode::random(&mut self.rng);
            if !self.issued_codes.contains(&code) && !self.sessions.contains_key(&code) {
                self.issued_codes.insert(code.clone());
                return code;
            }
        }
    }

    /// Starts a new group chat: a fresh code, a pending session and one
    /// invitation per invitee carrying the current member list (just the
    /// initiator at this point).
    pub fn start_chat(
        &mut self,
        invitees: &[String],
        self_nick: &str,
        at: i64,
    ) -> Result<(ChatCode, Vec<OutgoingWire>), ChatError> {
        if invitees.is_empty() {
            return Err(ChatError::InvalidWire("invitee list is empty".to_string()));
        }
        let code = self.generate_code();
        let members_on_wire = vec![(self.address.clone(), self_nick.to_string())];
        let mut out = Vec::new();
        for invitee in invitees {
            out.push(OutgoingWire {
                to: invitee.clone(),
                wire: WireChatMessage {
                    code: code.clone(),
                    kind: WireKind::Invite,
                    sender_nick: self_nick.to_string(),
                    payload: String::new(),
                    members: Some(members_on_wire.clone()),
                },
            });
        }
        self.sessions.insert(
            code.clone(),
            ChatSession {
                code: code.clone(),
                self_nick: self_nick.to_string(),
                members: BTreeMap::new(),
                state: SessionState::InvitePending,
                transcript: Vec::new(),
                initiator: true,
                pending_invitees: invitees.iter().cloned().collect(),
                inviter: None,
            },
        );
        let _ = at;
        Ok((code, out))
    }

    /// Routes one decoded wire through the state machine. `decision` may
    /// only accompany an invitation (immediate accept/reject); without it
    /// an invitation is parked in `pending_invites` for the user.
    pub fn handle_incoming(
        &mut self,
        from: &str,
        wire: WireChatMessage,
        at: i64,
        decision: Option<(InviteDecision, &str)>,
    ) -> Result<Vec<OutgoingWire>, ChatError> {
        if decision.is_some() && wire.kind != WireKind::Invite {
            return Err(ChatError::DecisionWithoutInvite);
        }
        match wire.kind {
            WireKind::Invite => {
                let invite = PendingInvite {
                    code: wire.code.clone(),
                    inviter: from.to_string(),
                    inviter_nick: wire.sender_nick.clone(),
                    members: wire.members.clone().unwrap_or_default(),
                    received_at: at,
                };
                self.pending_invites.insert(wire.code.clone(), invite);
                match decision {
                    Some((choice, nick)) => self.decide_invite(&wire.code.clone(), choice, nick, at),
                    None => Ok(Vec::new()),
                }
            }
            WireKind::Accept => self.on_accept(from, wire),
            WireKind::Reject => self.on_reject(from, wire),
            WireKind::Chat => self.on_chat(wire, at),
            WireKind::MemberUpdate => self.on_member_update(wire),
            WireKind::Leave => self.on_leave(from, wire),
        }
    }

    /// Resolves a parked invitation. Accepting creates an active session
    /// seeded with the invite's member snapshot and answers the inviter;
    /// rejecting just answers the inviter.
    pub fn decide_invite(
        &mut self,
        code: &ChatCode,
        decision: InviteDecision,
        self_nick: &str,
        at: i64,
    ) -> Result<Vec<OutgoingWire>, ChatError> {
        let invite = self
            .pending_invites
            .remove(code)
            .ok_or_else(|| ChatError::NoSuchInvite(code.clone()))?;
        match decision {
            InviteDecision::Reject => Ok(vec![OutgoingWire {
                to: invite.inviter,
                wire: WireChatMessage {
                    code: code.clone(),
                    kind: WireKind::Reject,
                    sender_nick: self_nick.to_string(),
                    payload: String::new(),
                    members: None,
                },
            }]),
            InviteDecision::Accept => {
                let mut members: BTreeMap<String, String> = invite
                    .members
                    .iter()
                    .cloned()
                    .filter(|(addr, _)| addr != &self.address)
                    .collect();
                members.insert(invite.inviter.clone(), invite.inviter_nick.clone());
                self.sessions.insert(
                    code.clone(),
                    ChatSession {
                        code: code.clone(),
                        self_nick: self_nick.to_string(),
                        members,
                        state: SessionState::Active,
                        transcript: Vec::new(),
                        initiator: false,
                        pending_invitees: BTreeSet::new(),
                        inviter: Some(invite.inviter.clone()),
                    },
                );
                let _ = at;
                Ok(vec![OutgoingWire {
                    to: invite.inviter,
                    wire: WireChatMessage {
                        code: code.clone(),
                        kind: WireKind::Accept,
                        sender_nick: self_nick.to_string(),
                        payload: String::new(),
                        members: Some(vec![(self.address.clone(), self_nick.to_string())]),
                    },
                }]),
            }
        }
    }

    fn on_accept(&mut self, from: &str, wire: WireChatMessage) -> Result<Vec<OutgoingWire>, ChatError> {
        let Some(session) = self.sessions.get_mut(&wire.code) else {
            self.log_drop(&wire, "accept for unknown code");
            return Ok(Vec::new());
        };
        if !session.initiator {
            self.log_drop(&wire, "accept received by non-initiator");
            return Ok(Vec::new());
        }
        session.pending_invitees.remove(from);
        session.members.insert(from.to_string(), wire.sender_nick.clone());
        session.state = SessionState::Active;
        Ok(Self::membership_broadcast(session, &self.address))
    }

    fn on_reject(&mut self, from: &str, wire: WireChatMessage) -> Result<Vec<OutgoingWire>, ChatError> {
        let Some(session) = self.sessions.get_mut(&wire.code) else {
            self.log_drop(&wire, "reject for unknown code");
            return Ok(Vec::new());
        };
        session.pending_invitees.remove(from);
        Ok(Vec::new())
    }

    fn on_chat(&mut self, wire: WireChatMessage, at: i64) -> Result<Vec<OutgoingWire>, ChatError> {
        let Some(session) = self.sessions.get_mut(&wire.code) else {
            self.log_drop(&wire, "chat message for unknown code");
            return Ok(Vec::new());
        };
        session
            .transcript
            .push((wire.sender_nick.clone(), wire.payload.clone(), at));
        Ok(Vec::new())
    }

    fn on_member_update(&mut self, wire: WireChatMessage) -> Result<Vec<OutgoingWire>, ChatError> {
        let Some(session) = self.sessions.get_mut(&wire.code) else {
            self.log_drop(&wire, "member update for unknown code");
            return Ok(Vec::new());
        };
        // The initiator's snapshot is authoritative; drop self from the view.
        let address = self.address.clone();
        session.members = wire
            .members
            .clone()
            .unwrap_or_default()
            .into_iter()
            .filter(|(addr, _)| addr != &address)
            .collect();
        Ok(Vec::new())
    }

    fn on_leave(&mut self, from: &str, wire: WireChatMessage) -> Result<Vec<OutgoingWire>, ChatError> {
        let Some(session) = self.sessions.get_mut(&wire.code) else {
            self.log_drop(&wire, "leave for unknown code");
            return Ok(Vec::new());
        };
        session.members.remove(from);
        if session.initiator {
            // Re-broadcast the authoritative membership to the remainder.
            return Ok(Self::membership_broadcast(session, &self.address));
        }
        Ok(Vec::new())
    }

    /// One MUP snapshot to every remote member, carrying the full list
    /// (initiator included).
    fn membership_broadcast(session: &ChatSession, self_address: &str) -> Vec<OutgoingWire> {
        let mut full_list: Vec<(String, String)> = session
            .members
            .iter()
            .map(|(a, n)| (a.clone(), n.clone()))
            .collect();
        full_list.push((self_address.to_string(), session.self_nick.clone()));
        full_list.sort();
        session
            .members
            .keys()
            .map(|to| OutgoingWire {
                to: to.clone(),
                wire: WireChatMessage {
                    code: session.code.clone(),
                    kind: WireKind::MemberUpdate,
                    sender_nick: session.self_nick.clone(),
                    payload: String::new(),
                    members: Some(full_list.clone()),
                },
            })
            .collect()
    }

    /// Sends a chat line to every remote member and appends it to the local
    /// transcript. Only valid on an active session.
    pub fn send_chat(
        &mut self,
        code: &ChatCode,
        text: &str,
        at: i64,
    ) -> Result<Vec<OutgoingWire>, ChatError> {
        let session = self
            .sessions
            .get_mut(code)
            .ok_or_else(|| ChatError::NoSuchSession(code.clone()))?;
        if session.state != SessionState::Active {
            return Err(ChatError::NotActive(code.clone()));
        }
        let out: Vec<OutgoingWire> = session
            .members
            .keys()
            .map(|to| OutgoingWire {
                to: to.clone(),
                wire: WireChatMessage {
                    code: code.clone(),
                    kind: WireKind::Chat,
                    sender_nick: session.self_nick.clone(),
                    payload: text.to_string(),
                    members: None,
                },
            })
            .collect();
        session
            .transcript
            .push((session.self_nick.clone(), text.to_string(), at));
        Ok(out)
    }

    /// Leaves a chat. Non-initiators notify the initiator, who broadcasts
    /// the shrunken membership; a leaving initiator notifies every member
    /// directly (each removes it locally). The local session closes.
    pub fn leave_chat(&mut self, code: &ChatCode, at: i64) -> Result<Vec<OutgoingWire>, ChatError> {
        let session = self
            .sessions
            .get_mut(code)
            .ok_or_else(|| ChatError::NoSuchSession(code.clone()))?;
        if session.state == SessionState::Closed {
            return Err(ChatError::NotActive(code.clone()));
        }
        let wire = |to: &String, nick: &str| OutgoingWire {
            to: to.clone(),
            wire: WireChatMessage {
                code: code.clone(),
                kind: WireKind::Leave,
                sender_nick: nick.to_string(),
                payload: String::new(),
                members: None,
            },
        };
        let out = if session.initiator {
            session.members.keys().map(|to| wire(to, &session.self_nick)).collect()
        } else {
            match &session.inviter {
                Some(inviter) => vec![wire(inviter, &session.self_nick)],
                None => Vec::new(),
            }
        };
        session.state = SessionState::Closed;
        let _ = at;
        Ok(out)
    }

    fn log_drop(&mut self, wire: &WireChatMessage, reason: &str) {
        self.drop_log
            .push(format!("{} {} dropped: {reason}", wire.kind.tag(), wire.code));
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(s: &str) -> ChatCode {
        ChatCode::parse(s).unwrap()
    }

    fn chat_wire(c: &str, nick: &str, payload: &str) -> WireChatMessage {
        WireChatMessage {
            code: code(c),
            kind: WireKind::Chat,
            sender_nick: nick.to_string(),
            payload: payload.to_string(),
            members: None,
        }
    }

    #[test]
    fn encode_matches_grammar() {
        let body = encode(&chat_wire("AAAAAAAA", "bob", "hi")).unwrap();
        assert_eq!(body, "#GSC1|AAAAAAAA|CHT|bob|hi");
    }

    #[test]
    fn plain_text_is_not_a_chat_wire() {
        assert_eq!(decode("hello there").unwrap(), Decoded::NotChatWire);
        assert_eq!(decode("").unwrap(), Decoded::NotChatWire);
        // Unknown protocol version falls through as a normal message.
        assert_eq!(decode("#GSC2|AAAAAAAA|CHT|bob|hi").unwrap(), Decoded::NotChatWire);
    }

    #[test]
    fn prefixed_garbage_is_a_parse_error() {
        assert!(decode("#GSC1|garbage").is_err());
        assert!(decode("#GSC1").is_err());
        assert!(decode("#GSC1|AAAAAAAA|XXX|bob|hi").is_err());
        // CHT must not carry a member list.
        assert!(decode("#GSC1|AAAAAAAA|CHT|bob|hi|+1~a").is_err());
        // INV must carry one.
        assert!(decode("#GSC1|AAAAAAAA|INV|bob|hi").is_err());
    }

    #[test]
    fn delimiters_in_payload_round_trip() {
        let wire = chat_wire("AAAAAAAA", "bob", "a|b,c~d\\e");
        let body = encode(&wire).unwrap();
        assert_eq!(decode(&body).unwrap(), Decoded::Wire(wire));
    }

    #[test]
    fn invite_member_list_round_trips() {
        let wire = WireChatMessage {
            code: code("Z9Z9Z9Z9"),
            kind: WireKind::Invite,
            sender_nick: "ali".to_string(),
            payload: String::new(),
            members: Some(vec![
                ("+100".to_string(), "ali".to_string()),
                ("+200".to_string(), "bo~b".to_string()),
            ]),
        };
        let body = encode(&wire).unwrap();
        assert_eq!(decode(&body).unwrap(), Decoded::Wire(wire));
    }

    #[test]
    fn oversized_payload_is_rejected() {
        let wire = chat_wire("AAAAAAAA", "bob", &"x".repeat(MAX_SMS_BYTES));
        assert!(matches!(encode(&wire), Err(ChatError::TooLarge)));
    }

    #[test]
    fn overlong_nick_is_rejected_both_ways() {
        let wire = chat_wire("AAAAAAAA", "seventeen-chars-x", "hi");
        assert!(encode(&wire).is_err());
        assert!(decode("#GSC1|AAAAAAAA|CHT|seventeen-chars-x|hi").is_err());
    }

    #[test]
    fn start_chat_emits_one_invite_per_invitee() {
        let mut alice = ChatState::new("+100", 7);
        let invitees = vec!["+200".to_string(), "+300".to_string(), "+400".to_string()];
        let (c, wires) = alice.start_chat(&invitees, "ali", 0).unwrap();
        assert_eq!(wires.len(), 3);
        assert!(wires.iter().all(|w| w.wire.code == c && w.wire.kind == WireKind::Invite));
        let session = &alice.sessions[&c];
        assert_eq!(session.state, SessionState::InvitePending);
        assert_eq!(session.pending_invitees.len(), 3);
    }

    #[test]
    fn successive_chats_get_distinct_codes() {
        let mut alice = ChatState::new("+100", 7);
        let mut seen = BTreeSet::new();
        for _ in 0..10_000 {
            assert!(seen.insert(alice.generate_code()));
        }
    }

    #[test]
    fn code_stream_is_deterministic_per_seed_and_address() {
        let mut a1 = ChatState::new("+100", 7);
        let mut a2 = ChatState::new("+100", 7);
        let mut b = ChatState::new("+200", 7);
        let c1 = a1.generate_code();
        assert_eq!(c1, a2.generate_code());
        assert_ne!(c1, b.generate_code());
    }

    #[test]
    fn accept_flow_adds_member_and_broadcasts() {
        let mut alice = ChatState::new("+100", 1);
        let mut bob = ChatState::new("+200", 2);
        let (c, invites) = alice.start_chat(&["+200".to_string()], "ali", 0).unwrap();

        let replies = bob
            .handle_incoming("+100", invites[0].wire.clone(), 1, None)
            .unwrap();
        assert!(replies.is_empty());
        assert!(bob.pending_invites.contains_key(&c));

        let accepts = bob.decide_invite(&c, InviteDecision::Accept, "bobby", 2).unwrap();
        assert_eq!(accepts.len(), 1);
        assert_eq!(accepts[0].to, "+100");
        assert_eq!(bob.sessions[&c].state, SessionState::Active);

        let updates = alice
            .handle_incoming("+200", accepts[0].wire.clone(), 3, None)
            .unwrap();
        assert_eq!(alice.sessions[&c].state, SessionState::Active);
        assert_eq!(alice.sessions[&c].members.get("+200").map(String::as_str), Some("bobby"));
        assert_eq!(updates.len(), 1);
        assert_eq!(updates[0].wire.kind, WireKind::MemberUpdate);
        let members = updates[0].wire.members.clone().unwrap();
        assert_eq!(
            members,
            vec![
                ("+100".to_string(), "ali".to_string()),
                ("+200".to_string(), "bobby".to_string()),
            ]
        );
    }

    #[test]
    fn reject_only_clears_the_pending_invitee() {
        let mut alice = ChatState::new("+100", 1);
        let mut bob = ChatState::new("+200", 2);
        let (c, invites) = alice.start_chat(&["+200".to_string()], "ali", 0).unwrap();
        bob.handle_incoming("+100", invites[0].wire.clone(), 1, None).unwrap();
        let rejects = bob.decide_invite(&c, InviteDecision::Reject, "bobby", 2).unwrap();
        assert_eq!(rejects[0].wire.kind, WireKind::Reject);
        assert!(bob.sessions.is_empty());

        alice.handle_incoming("+200", rejects[0].wire.clone(), 3, None).unwrap();
        let session = &alice.sessions[&c];
        assert!(session.pending_invitees.is_empty());
        assert!(session.members.is_empty());
        assert_eq!(session.state, SessionState::InvitePending);
    }

    #[test]
    fn chat_wire_with_unknown_code_is_dropped_and_logged() {
        let mut bob = ChatState::new("+200", 2);
        let out = bob.handle_incoming("+999", chat_wire("QQQQQQQQ", "x", "hi"), 0, None).unwrap();
        assert!(out.is_empty());
        assert!(bob.sessions.is_empty());
        assert_eq!(bob.drop_log.len(), 1);
    }

    #[test]
    fn send_chat_requires_active_session() {
        let mut alice = ChatState::new("+100", 1);
        let (c, _) = alice.start_chat(&["+200".to_string()], "ali", 0).unwrap();
        // Still InvitePending: nobody accepted yet.
        assert!(matches!(alice.send_chat(&c, "hi", 1), Err(ChatError::NotActive(_))));
    }

    #[test]
    fn send_chat_fans_out_and_appends_locally() {
        let mut alice = ChatState::new("+100", 1);
        let (c, _) = alice.start_chat(&["+200".to_string(), "+300".to_string()], "ali", 0).unwrap();
        let session = alice.sessions.get_mut(&c).unwrap();
        session.state = SessionState::Active;
        session.members.insert("+200".to_string(), "bobby".to_string());
        session.members.insert("+300".to_string(), "carol".to_string());

        let wires = alice.send_chat(&c, "hello all", 9).unwrap();
        assert_eq!(wires.len(), 2);
        assert!(wires.iter().all(|w| w.wire.kind == WireKind::Chat));
        let transcript = &alice.sessions[&c].transcript;
        assert_eq!(transcript.len(), 1);
        assert_eq!(transcript[0], ("ali".to_string(), "hello all".to_string(), 9));

        // Empty text is allowed.
        assert_eq!(alice.send_chat(&c, "", 10).unwrap().len(), 2);
    }

    #[test]
    fn decision_on_non_invite_is_a_contract_error() {
        let mut bob = ChatState::new("+200", 2);
        let err = bob.handle_incoming(
            "+100",
            chat_wire("AAAAAAAA", "x", "hi"),
            0,
            Some((InviteDecision::Accept, "bobby")),
        );
        assert!(matches!(err, Err(ChatError::DecisionWithoutInvite)));
    }

    #[test]
    fn member_leave_notifies_initiator_who_rebroadcasts() {
        let mut alice = ChatState::new("+100", 1);
        let (c, _) = alice.start_chat(&["+200".to_string(), "+300".to_string()], "ali", 0).unwrap();
        let session = alice.sessions.get_mut(&c).unwrap();
        session.state = SessionState::Active;
        session.members.insert("+200".to_string(), "bobby".to_string());
        session.members.insert("+300".to_string(), "carol".to_string());

        let mut bob = ChatState::new("+200", 2);
        bob.sessions.insert(
            c.clone(),
            ChatSession {
                code: c.clone(),
                self_nick: "bobby".to_string(),
                members: [("+100".to_string(), "ali".to_string()), ("+300".to_string(), "carol".to_string())]
                    .into_iter()
                    .collect(),
                state: SessionState::Active,
                transcript: Vec::new(),
                initiator: false,
                pending_invitees: BTreeSet::new(),
                inviter: Some("+100".to_string()),
            },
        );
        let leaves = bob.leave_chat(&c, 5).unwrap();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].to, "+100");
        assert_eq!(bob.sessions[&c].state, SessionState::Closed);

        let updates = alice.handle_incoming("+200", leaves[0].wire.clone(), 6, None).unwrap();
        assert!(!alice.sessions[&c].members.contains_key("+200"));
        assert_eq!(updates.len(), 1); // only +300 remains
        assert_eq!(updates[0].to, "+300");
        assert_eq!(updates[0].wire.kind, WireKind::MemberUpdate);
    }
}
