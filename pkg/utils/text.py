import logging
import re
from typing import Optional

logger = logging.getLogger(__name__)


KEY_VALUE_PATTERN = re.compile(
    r"^(?P<key>[A-Za-z_][\w]*(?:\.[A-Za-z_][\w]*)*)\s*=\s*(?P<value>.*)$"
)
COMMENT_PATTERN = re.compile(r"#.*$")
LIST_SEPARATOR_PATTERN = re.compile(r"\s*,\s*")
BRACKETS_PATTERN = re.compile(r"^\[(.*)\]$|^\((.*)\)$")

TRUE_WORDS = frozenset({"true", "yes", "on", "1"})
FALSE_WORDS = frozenset({"false", "no", "off", "0"})
NONE_WORDS = frozenset({"none", "null", ""})

FLOAT_FORMAT = "%.12g"


def strip_comment(line: str) -> str:
    """Remove a `# ...` comment and surrounding whitespace."""
    return COMMENT_PATTERN.sub("", line).strip()


def parse_key_value(line: str, line_number: int = 0) -> Optional[tuple[str, str]]:
    """Split a `key = value` config line; None for blank and comment-only lines."""
    content = strip_comment(line)
    if not content:
        return None
    match = KEY_VALUE_PATTERN.match(content)
    if not match:
        raise ValueError(f"line {line_number}: expected 'key = value', got {line.strip()!r}")
    return match.group("key"), match.group("value").strip()


def parse_bool(text: str) -> bool:
    word = text.strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_optional_float(text: str) -> Optional[float]:
    word = text.strip()
    if word.lower() in NONE_WORDS:
        return None
    return float(word)


def split_list(text: str) -> list[str]:
    """`1, 3, 5` or `[1, 3, 5]` -> ['1', '3', '5']."""
    body = text.strip()
    match = BRACKETS_PATTERN.match(body)
    if match:
        body = match.group(1) if match.group(1) is not None else match.group(2)
    body = body.strip()
    if not body:
        return []
    return LIST_SEPARATOR_PATTERN.split(body)


def format_float(value: float) -> str:
    """Fixed 12-significant-digit rendering used in every emitted file."""
    return FLOAT_FORMAT % value


def format_complex(value: complex) -> str:
    sign = "+" if value.imag >= 0 else "-"
    return f"{format_float(value.real)}{sign}{format_float(abs(value.imag))}j"
