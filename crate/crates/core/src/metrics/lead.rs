use crate::text::tokenize;

/// Summary length of the extractive LEAD baseline.
pub const LEAD_TOKENS: usize = 64;

/// The first `n` tokens of `text`, joined with single spaces.
pub fn lead_n(text: &str, n: usize) -> String {
    tokenize(text)
        .into_iter()
        .take(n)
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let ten = (0..10).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        assert_eq!(lead_n(&ten, LEAD_TOKENS), ten);
        let hundred = (0..100).map(|i| format!("w{i}")).collect::<Vec<_>>().join("  ");
        assert_eq!(tokenize(&lead_n(&hundred, LEAD_TOKENS)).len(), 64);
        assert_eq!(lead_n("First, second.", 1), "first");
        assert_eq!(lead_n("", 64), "");
    }
}
