"""Java grammar tables and analysis entry point."""

from __future__ import annotations

import re

from .cfamily import Rules

JAVA_KEYWORDS = frozenset("""
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while true false null
""".split())

# Contextual keywords are legal identifiers, but never offered as substitutes.
JAVA_RESERVED_SUBSTITUTES = JAVA_KEYWORDS | frozenset(
    "var yield record sealed permits".split())

_TYPE_KW = frozenset(t.encode() for t in
                     "boolean byte char short int long float double void".split())

_MODIFIER_KW = frozenset(t.encode() for t in
                         "public private protected static final abstract native "
                         "synchronized transient volatile strictfp default".split())

_CONTROL_KW = frozenset(t.encode() for t in
                        "if else for while do switch try catch finally synchronized".split())

_PUNCT2 = frozenset(p.encode() for p in
                    "-> :: ++ -- << >> <= >= == != && || += -= *= /= %= &= |= ^=".split())
_PUNCT3 = frozenset(p.encode() for p in "<<= >>= >>> ...".split())
_PUNCT4 = frozenset((b">>>=",))

_SINGLE = frozenset(b"()[]{}<>+-*/%=!&|^~?:;,.@")

_IDENT_START = frozenset(b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_$")

IDENT_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")

RULES = Rules(
    name="java",
    keywords=JAVA_KEYWORDS,
    type_keywords=_TYPE_KW,
    modifier_keywords=_MODIFIER_KW,
    control_keywords=_CONTROL_KW,
    member_ops=frozenset((b".", b"::")),
    punct2=_PUNCT2,
    punct3=_PUNCT3,
    punct4=_PUNCT4,
    single_punct=_SINGLE,
    ident_start=_IDENT_START,
    ident_re=IDENT_RE,
    reserved_substitutes=JAVA_RESERVED_SUBSTITUTES,
    has_preprocessor=False,
    dollar_idents=True,
    generics=True,
    calls_use_variables=False,  # methods live in their own namespace
    text_blocks=True,
)
