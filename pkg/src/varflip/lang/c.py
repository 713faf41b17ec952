"""C grammar tables and analysis entry point."""

from __future__ import annotations

import re

from .cfamily import Rules

C_KEYWORDS = frozenset("""
    auto break case char const continue default do double else enum extern
    float for goto if inline int long register restrict return short signed
    sizeof static struct switch typedef union unsigned void volatile while
    _Alignas _Alignof _Atomic _Bool _Complex _Generic _Imaginary _Noreturn
    _Static_assert _Thread_local
""".split())

_TYPE_KW = frozenset(t.encode() for t in
                     "void char short int long float double signed unsigned "
                     "_Bool _Complex _Imaginary".split())

_MODIFIER_KW = frozenset(t.encode() for t in
                         "auto const extern inline register restrict static "
                         "volatile typedef _Atomic _Noreturn _Thread_local _Alignas".split())

_CONTROL_KW = frozenset(t.encode() for t in
                        "if else for while do switch".split())

_PUNCT2 = frozenset(p.encode() for p in
                    "-> ++ -- << >> <= >= == != && || += -= *= /= %= &= |= ^= ##".split())
_PUNCT3 = frozenset(p.encode() for p in "<<= >>= ...".split())

_SINGLE = frozenset(b"()[]{}<>+-*/%=!&|^~?:;,.#")

_IDENT_START = frozenset(b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz_")

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")

RULES = Rules(
    name="c",
    keywords=C_KEYWORDS,
    type_keywords=_TYPE_KW,
    modifier_keywords=_MODIFIER_KW,
    control_keywords=_CONTROL_KW,
    member_ops=frozenset((b".", b"->")),
    punct2=_PUNCT2,
    punct3=_PUNCT3,
    punct4=frozenset(),
    single_punct=_SINGLE,
    ident_start=_IDENT_START,
    ident_re=IDENT_RE,
    reserved_substitutes=C_KEYWORDS,
    has_preprocessor=True,
    dollar_idents=False,
    generics=False,
    calls_use_variables=True,  # function pointers make calls real variable uses
)
