//! The SMS transport unit and phone-address handling shared by all modules.

/// Upper bound on an SMS body enforced by the simulated transport.
pub const MAX_SMS_BYTES: usize = 4096;

/// How a delivered SMS was routed after decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    /// Ordinary SMS, handed to the spam pipeline and rules engine.
    Normal,
    /// Carries an encoded group-chat frame; consumed by the chat layer.
    ChatWire,
}

/// A single SMS as seen by the controller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmsMessage {
    /// Sender phone address (possibly an alphanumeric sender id).
    pub sender: String,
    /// UTF-8 body, at most [`MAX_SMS_BYTES`] bytes on the simulated bus.
    pub body: String,
    /// Milliseconds since epoch, supplied by the driving clock.
    pub timestamp: i64,
    pub kind: MessageKind,
}

impl SmsMessage {
    pub fn normal(sender: impl Into<String>, body: impl Into<String>, timestamp: i64) -> Self {
        SmsMessage {
            sender: sender.into(),
            body: body.into(),
            timestamp,
            kind: MessageKind::Normal,
        }
    }
}

/// Canonicalizes a phone address for set membership tests: strips `-`,
/// spaces and parentheses, keeping everything else (including a leading `+`)
/// untouched, so that `+1 (555) 010-0000` and `+15550100000` compare equal.
pub fn canonicalize_address(addr: &str) -> String {
    addr.chars()
        .filter(|c| !matches!(c, '-' | ' ' | '(' | ')'))
        .collect()
}

/// A "weird" number is any sender whose canonical form contains a character
/// other than digits or a leading `+` — i.e. an alphanumeric sender id.
pub fn is_weird_address(addr: &str) -> bool {
    let canon = canonicalize_address(addr);
    canon
        .char_indices()
        .any(|(i, c)| !(c.is_ascii_digit() || (i == 0 && c == '+')))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalization_strips_formatting() {
        assert_eq!(canonicalize_address("+1 (555) 010-0000"), "+15550100000");
        assert_eq!(canonicalize_address("0800 123 456"), "0800123456");
    }

    #[test]
    fn weirdness_flags_alphanumeric_ids() {
        assert!(is_weird_address("PROMO-4U"));
        assert!(is_weird_address("WIN2DAY"));
        assert!(!is_weird_address("+15550100000"));
        assert!(!is_weird_address("0800 123 456"));
        // `+` only counts as normal in leading position
        assert!(is_weird_address("555+123"));
    }
}
