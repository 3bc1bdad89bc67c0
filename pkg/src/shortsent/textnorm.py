"""Text normalization shared by the tokenizer, augmentation and rule tagging."""

import unicodedata


def is_punct(ch: str) -> bool:
    """True for punctuation and symbol characters (Unicode P* and S*)."""
    return unicodedata.category(ch)[0] in ("P", "S")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace, detaching edge punctuation as tokens.

    Chunks made entirely of punctuation (emoticons like ":(") stay whole.
    The result is stable under re-tokenizing its space-joined form.
    """
    tokens: list[str] = []
    for chunk in text.lower().split():
        if all(is_punct(c) for c in chunk):
            tokens.append(chunk)
            continue
        lead = []
        while chunk and is_punct(chunk[0]):
            lead.append(chunk[0])
            chunk = chunk[1:]
        trail = []
        while chunk and is_punct(chunk[-1]):
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(lead)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(trail))
    return tokens


def strip_edge_punct(token: str) -> tuple[str, str, str]:
    """Split a raw token into (leading punct, core, trailing punct)."""
    start = 0
    end = len(token)
    while start < end and is_punct(token[start]):
        start += 1
    while end > start and is_punct(token[end - 1]):
        end -= 1
    return token[:start], token[start:end], token[end:]


def normalize_token(token: str) -> str:
    """Comparison form of a raw token: edge punctuation stripped, casefolded.

    Pure-punctuation tokens compare as themselves so emoticons stay matchable.
    """
    core = strip_edge_punct(token)[1]
    return core.casefold() if core else token.casefold()
