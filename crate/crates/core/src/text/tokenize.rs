use super::TextError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TokenizeMode {
    /// One token per Unicode scalar value, whitespace dropped.
    #[default]
    Char,
    /// One token per whitespace-delimited word.
    Word,
}

impl TokenizeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenizeMode::Char => "char",
            TokenizeMode::Word => "word",
        }
    }

    /// Joins tokens back into display text.
    pub fn detokenize<S: AsRef<str>>(self, tokens: &[S]) -> String {
        let sep = match self {
            TokenizeMode::Char => "",
            TokenizeMode::Word => " ",
        };
        tokens
            .iter()
            .map(AsRef::as_ref)
            .collect::<Vec<_>>()
            .join(sep)
    }
}

impl std::str::FromStr for TokenizeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "char" => Ok(TokenizeMode::Char),
            "word" => Ok(TokenizeMode::Word),
            other => Err(format!(
                "unknown tokenize mode {other:?} (expected char|word)"
            )),
        }
    }
}

pub fn tokenize(text: &str, mode: TokenizeMode) -> Result<Vec<String>, TextError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(TextError::EmptyInput);
    }
    let tokens = match mode {
        TokenizeMode::Char => text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
        TokenizeMode::Word => text.split_whitespace().map(String::from).collect(),
    };
    Ok(tokens)
}
