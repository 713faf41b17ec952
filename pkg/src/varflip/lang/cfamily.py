"""Lexer and scope-aware declaration scanner shared by the C and Java backends.

The scanner's contract is safety, not completeness: every occurrence list it
produces must be exact (renaming all spans of a variable, and nothing else,
preserves operational semantics), while declarations it cannot parse with
confidence simply yield no extractable variable. Unrecognised declarators are
still bound for scope resolution so their uses are never attributed to an
enclosing variable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..core import Identifier, OccurrenceSpan
from ..errors import ParseError

# Token kinds.
ID = "id"
KW = "kw"
NUM = "num"
STR = "str"
CHR = "chr"
PUNCT = "punct"
PREPROC = "preproc"

# Binding kinds.
LOCAL = "local"
PARAM = "param"
FIELD = "field"
GLOBAL = "global"
FUNC = "function"
TYPE = "type"

_IDENT_BODY_RE = re.compile(rb"[A-Za-z0-9_$]*")
_PREPROC_IDENT_RE = re.compile(rb"[A-Za-z_$][A-Za-z0-9_$]*")
_DEFINE_RE = re.compile(rb"#\s*define\s+([A-Za-z_][A-Za-z0-9_]*)")

_WS = frozenset(b" \t\r\f\v")
_DIGITS = frozenset(b"0123456789")
_NUM_BODY = frozenset(b"0123456789abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ._")
_EXP_MARKS = frozenset(b"eEpP")

_OPEN_TO_CLOSE = {b"(": b")", b"[": b"]", b"{": b"}"}
_CLOSERS = frozenset((b")", b"]", b"}"))


@dataclass(frozen=True)
class Rules:
    """Per-language lexical and declaration-shape rules."""

    name: str
    keywords: frozenset[str]
    type_keywords: frozenset[bytes]
    modifier_keywords: frozenset[bytes]
    control_keywords: frozenset[bytes]
    member_ops: frozenset[bytes]
    punct2: frozenset[bytes]
    punct3: frozenset[bytes]
    punct4: frozenset[bytes]
    single_punct: frozenset[int]
    ident_start: frozenset[int]
    ident_re: "re.Pattern[str]"
    reserved_substitutes: frozenset[str]
    has_preprocessor: bool = False
    dollar_idents: bool = False
    generics: bool = False
    calls_use_variables: bool = True  # False where calls live in a separate namespace
    text_blocks: bool = False


@dataclass
class Token:
    kind: str
    start: int
    end: int
    text: bytes
    index: int = -1

    def __repr__(self) -> str:  # compact for test failures
        return f"<{self.kind} {self.text!r}@{self.start}>"


@dataclass
class Group:
    """A bracketed region of the token stream; items are Tokens or Groups."""

    open_tok: "Token | None"
    items: list
    close_tok: "Token | None" = None

    @property
    def bracket(self) -> bytes:
        return self.open_tok.text if self.open_tok else b""


def lex(blob: bytes, rules: Rules) -> list[Token]:
    """Tokenize; raises ParseError on lexical errors (which define the grammar)."""
    tokens: list[Token] = []
    i = 0
    n = len(blob)
    line_start = True

    def err(msg: str, pos: int) -> ParseError:
        return ParseError(f"{rules.name}: {msg} at byte {pos}")

    while i < n:
        b = blob[i]
        if b in _WS:
            i += 1
            continue
        if b == 0x0A:  # \n
            line_start = True
            i += 1
            continue
        if b == 0x5C and i + 1 < n and blob[i + 1] in (0x0A, 0x0D):  # line splice
            i += 2
            continue
        if b == 0x2F and i + 1 < n and blob[i + 1] == 0x2F:  # //
            j = blob.find(b"\n", i)
            i = n if j < 0 else j
            continue
        if b == 0x2F and i + 1 < n and blob[i + 1] == 0x2A:  # /*
            j = blob.find(b"*/", i + 2)
            if j < 0:
                raise err("unterminated block comment", i)
            if b"\n" in blob[i:j]:
                line_start = True
            i = j + 2
            continue
        if b == 0x23 and rules.has_preprocessor:  # '#'
            if not line_start:
                raise err("'#' outside a preprocessor directive", i)
            start = i
            while i < n:
                c = blob[i]
                if c == 0x5C and i + 1 < n and blob[i + 1] == 0x0A:
                    i += 2
                    continue
                if c == 0x2F and i + 1 < n and blob[i + 1] == 0x2A:
                    j = blob.find(b"*/", i + 2)
                    if j < 0:
                        raise err("unterminated block comment", i)
                    i = j + 2
                    continue
                if c == 0x0A:
                    break
                i += 1
            tokens.append(Token(PREPROC, start, i, blob[start:i]))
            continue
        line_start = False
        if b == 0x22:  # '"'
            if rules.text_blocks and blob[i:i + 3] == b'"""':
                j = blob.find(b'"""', i + 3)
                if j < 0:
                    raise err("unterminated text block", i)
                tokens.append(Token(STR, i, j + 3, blob[i:j + 3]))
                i = j + 3
                continue
            j = i + 1
            while True:
                if j >= n:
                    raise err("unterminated string literal", i)
                c = blob[j]
                if c == 0x5C:
                    j += 2
                    continue
                if c == 0x0A:
                    raise err("newline in string literal", i)
                if c == 0x22:
                    break
                j += 1
            tokens.append(Token(STR, i, j + 1, blob[i:j + 1]))
            i = j + 1
            continue
        if b == 0x27:  # "'"
            j = i + 1
            while True:
                if j >= n:
                    raise err("unterminated character literal", i)
                c = blob[j]
                if c == 0x5C:
                    j += 2
                    continue
                if c == 0x0A:
                    raise err("newline in character literal", i)
                if c == 0x27:
                    break
                j += 1
            tokens.append(Token(CHR, i, j + 1, blob[i:j + 1]))
            i = j + 1
            continue
        if b in _DIGITS or (b == 0x2E and i + 1 < n and blob[i + 1] in _DIGITS):
            j = i + 1
            while j < n:
                c = blob[j]
                if c in _NUM_BODY:
                    j += 1
                elif c in (0x2B, 0x2D) and blob[j - 1] in _EXP_MARKS:  # 1e+5
                    j += 1
                else:
                    break
            tokens.append(Token(NUM, i, j, blob[i:j]))
            i = j
            continue
        if b in rules.ident_start:
            m = _IDENT_BODY_RE.match(blob, i + 1)
            j = m.end()
            if not rules.dollar_idents and 0x24 in blob[i:j]:
                raise err("'$' in identifier", i)
            text = blob[i:j]
            kind = KW if text.decode("ascii") in rules.keywords else ID
            tokens.append(Token(kind, i, j, text))
            i = j
            continue
        # punctuation, longest match first
        matched = False
        for width, table in ((4, rules.punct4), (3, rules.punct3), (2, rules.punct2)):
            chunk = blob[i:i + width]
            if len(chunk) == width and chunk in table:
                tokens.append(Token(PUNCT, i, i + width, chunk))
                i += width
                matched = True
                break
        if matched:
            continue
        if b in rules.single_punct:
            tokens.append(Token(PUNCT, i, i + 1, blob[i:i + 1]))
            i += 1
            continue
        raise err(f"illegal byte 0x{b:02x}", i)

    for idx, tok in enumerate(tokens):
        tok.index = idx
    return tokens


def build_groups(tokens: list[Token], rules: Rules) -> Group:
    root = Group(None, [])
    stack = [root]
    for tok in tokens:
        if tok.kind == PUNCT and tok.text in _OPEN_TO_CLOSE:
            g = Group(tok, [])
            stack[-1].items.append(g)
            stack.append(g)
        elif tok.kind == PUNCT and tok.text in _CLOSERS:
            if len(stack) == 1:
                raise ParseError(f"{rules.name}: unmatched {tok.text!r} at byte {tok.start}")
            g = stack.pop()
            if _OPEN_TO_CLOSE[g.open_tok.text] != tok.text:
                raise ParseError(
                    f"{rules.name}: mismatched {g.open_tok.text!r}...{tok.text!r}"
                    f" at byte {tok.start}")
            g.close_tok = tok
        else:
            stack[-1].items.append(tok)
    if len(stack) != 1:
        g = stack[-1]
        raise ParseError(f"{rules.name}: unclosed {g.open_tok.text!r} at byte {g.open_tok.start}")
    return root


@dataclass
class Binding:
    name: str
    kind: str
    decl_pos: int
    initialized: bool = False
    extractable: bool = True
    decl_spans: list[tuple[int, int]] = field(default_factory=list)
    use_spans: list[tuple[int, int]] = field(default_factory=list)

    @property
    def position_dependent(self) -> bool:
        # Block locals come into scope at their declarator; file/class-level
        # names (fields, functions, globals) are visible everywhere.
        return self.kind in (LOCAL, PARAM)


@dataclass
class Scope:
    start: int
    end: int
    parent: "Scope | None"
    bindings: dict[str, list[Binding]] = field(default_factory=dict)

    def bind(self, binding: Binding) -> None:
        self.bindings.setdefault(binding.name, []).append(binding)

    def resolve(self, name: str, pos: int) -> "Binding | None":
        scope: Scope | None = self
        while scope is not None:
            for binding in reversed(scope.bindings.get(name, ())):
                if not binding.position_dependent or binding.decl_pos <= pos:
                    return binding
            scope = scope.parent
        return None


def _is_punct(item, text: bytes) -> bool:
    return isinstance(item, Token) and item.kind == PUNCT and item.text == text

def _is_kw(item, text: bytes) -> bool:
    return isinstance(item, Token) and item.kind == KW and item.text == text

def _is_id(item) -> bool:
    return isinstance(item, Token) and item.kind == ID

def _is_group(item, bracket: bytes) -> bool:
    return isinstance(item, Group) and item.bracket == bracket


_INIT_PREV_PUNCT = frozenset((b";", b"{", b"}", b")", b"(", b",", b"=", b":"))
_TYPEISH_GENERIC_PUNCT = frozenset((b",", b".", b"?", b"&", b"<", b">", b">>", b">>>"))


def match_generic(items: list, i: int, rules: Rules) -> "int | None":
    """If items[i] opens a type-argument list, return the index just past it."""
    if not rules.generics or not _is_punct(items[i], b"<"):
        return None
    depth = 0
    j = i
    while j < len(items):
        it = items[j]
        if isinstance(it, Token):
            t = it.text
            if it.kind == PUNCT:
                if t == b"<":
                    depth += 1
                elif t in (b">", b">>", b">>>"):
                    depth -= len(t)
                    if depth < 0:
                        return None
                    if depth == 0:
                        return j + 1
                elif t not in _TYPEISH_GENERIC_PUNCT:
                    return None
            elif it.kind == ID:
                pass
            elif it.kind == KW and t in (b"extends", b"super") | rules.type_keywords:
                pass
            else:
                return None
        elif isinstance(it, Group) and it.bracket == b"[":
            pass
        else:
            return None
        j += 1
    return None


def split_top(items: list, sep: bytes, rules: Rules, *, skip_generics: bool = False) -> list[list]:
    """Split an item list on a top-level separator token."""
    parts: list[list] = [[]]
    i = 0
    while i < len(items):
        it = items[i]
        if skip_generics and _is_punct(it, b"<"):
            j = match_generic(items, i, rules)
            if j is not None:
                parts[-1].extend(items[i:j])
                i = j
                continue
        if _is_punct(it, sep):
            parts.append([])
        else:
            parts[-1].append(it)
        i += 1
    return parts


class Scanner:
    """Two-pass analyzer: collect scopes/bindings, then resolve occurrences."""

    def __init__(self, blob: bytes, tokens: list[Token], root: Group, rules: Rules):
        self.blob = blob
        self.tokens = tokens
        self.root = root
        self.rules = rules
        self.scope_of: list[Scope | None] = [None] * len(tokens)
        self.file_scope = Scope(0, len(blob) + 1, None)
        self.scopes: list[Scope] = [self.file_scope]
        self.consumed: set[int] = set()
        self.field_names: set[str] = set()
        self.member_access_names: set[str] = set()
        self.macro_names: set[str] = set()
        self.all_bindings: list[Binding] = []

    # -- scope/bind helpers ---------------------------------------------

    def new_scope(self, start: int, end: int, parent: Scope) -> Scope:
        scope = Scope(start, end, parent)
        self.scopes.append(scope)
        return scope

    def bind(self, scope: Scope, name_tok: Token, kind: str, *, initialized: bool = False,
             extractable: bool = True) -> Binding:
        b = Binding(name_tok.text.decode("ascii"), kind, name_tok.start,
                    initialized=initialized, extractable=extractable)
        b.decl_spans.append((name_tok.start, name_tok.end))
        scope.bind(b)
        self.all_bindings.append(b)
        self.consumed.add(name_tok.index)
        if kind == FIELD:
            self.field_names.add(b.name)
        return b

    def tag_expr(self, item, scope: Scope) -> None:
        """Assign every token under an expression item to `scope`."""
        if isinstance(item, Token):
            self.scope_of[item.index] = scope
            return
        for sub in item.items:
            self.tag_expr(sub, scope)

    def tag_items(self, items: list, scope: Scope) -> None:
        for it in items:
            self.tag_expr(it, scope)

    # -- pass A: structure ------------------------------------------------

    def run(self) -> None:
        mode = "file"
        if self.rules.name == "java" and not self._java_has_toplevel_type():
            mode = "class"  # bare method / bare members snippet
        self.scan_stream(self.root.items, self.file_scope, mode)
        if self.rules.has_preprocessor:
            self._collect_macros()
        self.resolve_occurrences()

    def _java_has_toplevel_type(self) -> bool:
        for it in self.root.items:
            if isinstance(it, Token) and it.kind == KW and \
                    it.text in (b"class", b"interface", b"enum"):
                return True
        return False

    def _collect_macros(self) -> None:
        for tok in self.tokens:
            if tok.kind == PREPROC:
                m = _DEFINE_RE.match(tok.text)
                if m:
                    self.macro_names.add(m.group(1).decode("ascii"))

    def scan_stream(self, items: list, scope: Scope, mode: str) -> None:
        i = 0
        n = len(items)
        stmt: list = []
        while i < n:
            it = items[i]
            if isinstance(it, Token):
                self.scope_of[it.index] = scope
                if it.kind == PREPROC:
                    i += 1  # directives never join the surrounding statement
                    continue

            if _is_punct(it, b";"):
                self.handle_simple_statement(stmt, scope, mode)
                stmt = []
                i += 1
                continue

            if (not stmt and isinstance(it, Token) and it.kind == KW
                    and it.text in self.rules.control_keywords):
                nxt = self.handle_control(items, i, scope, mode)
                if nxt is not None:
                    i = nxt
                    continue

            if isinstance(it, Group) and it.bracket == b"{":
                role = self.classify_brace(stmt, mode)
                if role in ("expr", "aggregate"):
                    stmt.append(it)
                    i += 1
                    continue
                if role == "function":
                    self.handle_function_def(stmt, it, scope, mode)
                    stmt = []
                    i += 1
                    continue
                if role == "javatype":
                    self.handle_java_type(stmt, it, scope)
                    stmt = []
                    i += 1
                    continue
                # plain block statement
                self.handle_simple_statement(stmt, scope, mode)
                stmt = []
                child = self.new_scope(it.open_tok.start, it.close_tok.end, scope)
                self.scan_stream(it.items, child, "block")
                i += 1
                continue

            stmt.append(it)
            i += 1
        self.handle_simple_statement(stmt, scope, mode)

    def classify_brace(self, stmt: list, mode: str) -> str:
        if not stmt:
            return "block"
        has_assign = any(_is_punct(x, b"=") for x in stmt)
        has_new = any(_is_kw(x, b"new") for x in stmt)
        starts_return = _is_kw(stmt[0], b"return") or _is_kw(stmt[0], b"throw")
        if has_assign or has_new or starts_return:
            return "expr"
        if self.rules.name == "java":
            for x in stmt:
                if isinstance(x, Token) and x.kind == KW and \
                        x.text in (b"class", b"interface", b"enum"):
                    return "javatype"
        else:
            for x in stmt:
                if isinstance(x, Token) and x.kind == KW and \
                        x.text in (b"struct", b"union", b"enum"):
                    return "aggregate"
        # function definition: ... IDENT ( ... ) [trailer] {
        paren_at = None
        for idx in range(len(stmt) - 1, -1, -1):
            if _is_group(stmt[idx], b"("):
                paren_at = idx
                break
        if paren_at is not None and paren_at > 0 and _is_id(stmt[paren_at - 1]):
            trailer_ok = True
            for x in stmt[paren_at + 1:]:
                if isinstance(x, Token) and (
                        x.kind == ID or
                        (x.kind == KW and x.text in (b"throws", b"const")) or
                        (x.kind == PUNCT and x.text in (b",", b".", b"@"))):
                    continue
                trailer_ok = False
                break
            if trailer_ok:
                return "function"
        return "block"

    def handle_control(self, items: list, i: int, scope: Scope, mode: str) -> "int | None":
        kw = items[i].text
        n = len(items)
        if kw == b"synchronized" and not (i + 1 < n and _is_group(items[i + 1], b"(")):
            return None  # modifier position, not a statement
        self.scope_of[items[i].index] = scope
        i += 1

        if kw in (b"else", b"do", b"finally"):
            return self.consume_body(items, i, scope, mode)

        if kw in (b"for", b"try"):
            header = None
            if i < n and _is_group(items[i], b"("):
                header = items[i]
                i += 1
            header_scope = scope
            if header is not None:
                # provisional end patched once the body extent is known
                header_scope = self.new_scope(header.open_tok.start, scope.end, scope)
                self.scan_decl_header(header, header_scope, enhanced=(kw == b"for"))
            nxt = self.consume_body(items, i, header_scope, mode)
            if header is not None and nxt - 1 >= 0 and nxt <= n:
                last = items[nxt - 1] if nxt > 0 else header
                end = last.close_tok.end if isinstance(last, Group) else last.end
                header_scope.end = max(end, header.close_tok.end)
            return nxt

        # if / while / switch / synchronized / catch
        if i < n and _is_group(items[i], b"("):
            self.tag_expr(items[i], scope)
            i += 1
        i = self.consume_body(items, i, scope, mode)
        if kw == b"if":
            while i < n and _is_kw(items[i], b"else"):
                self.scope_of[items[i].index] = scope
                i += 1
                if i < n and _is_kw(items[i], b"if"):
                    self.scope_of[items[i].index] = scope
                    i += 1
                    if i < n and _is_group(items[i], b"("):
                        self.tag_expr(items[i], scope)
                        i += 1
                i = self.consume_body(items, i, scope, mode)
        return i

    def consume_body(self, items: list, i: int, scope: Scope, mode: str) -> int:
        """One statement used as a control body; returns the next index."""
        n = len(items)
        if i >= n:
            return i
        it = items[i]
        if _is_punct(it, b";"):
            self.scope_of[it.index] = scope
            return i + 1
        if isinstance(it, Group) and it.bracket == b"{":
            child = self.new_scope(it.open_tok.start, it.close_tok.end, scope)
            self.scan_stream(it.items, child, "block")
            return i + 1
        if isinstance(it, Token) and it.kind == KW and it.text in self.rules.control_keywords:
            nxt = self.handle_control(items, i, scope, mode)
            if nxt is not None:
                return nxt
        # single-statement body: cannot declare anything, consume to ';'
        while i < n:
            it = items[i]
            self.tag_expr(it, scope)
            i += 1
            if _is_punct(it, b";"):
                break
        return i

    def scan_decl_header(self, header: Group, scope: Scope, *, enhanced: bool) -> None:
        """for(...) and try(...) headers: declarations scoped to header+body."""
        self.tag_items(header.items, scope)
        segments = split_top(header.items, b";", self.rules, skip_generics=self.rules.generics)
        for seg in segments:
            if not seg:
                continue
            if enhanced and self.rules.name == "java":
                colon_split = split_top(seg, b":", self.rules, skip_generics=True)
                if len(colon_split) == 2:
                    self.try_declaration(colon_split[0], scope, LOCAL, default_init=True)
                    continue
            self.try_declaration(seg, scope, LOCAL)

    def handle_function_def(self, stmt: list, body: Group, scope: Scope, mode: str) -> None:
        paren_at = None
        for idx in range(len(stmt) - 1, -1, -1):
            if _is_group(stmt[idx], b"("):
                paren_at = idx
                break
        if paren_at is None or paren_at == 0 or not _is_id(stmt[paren_at - 1]):
            self.tag_items(stmt, scope)
            child = self.new_scope(body.open_tok.start, body.close_tok.end, scope)
            self.scan_stream(body.items, child, "block")
            return
        name_tok = stmt[paren_at - 1]
        self.bind(scope, name_tok, FUNC)
        params = stmt[paren_at]
        body_scope = self.new_scope(params.open_tok.start, body.close_tok.end, scope)
        self.bind_params(params, body_scope)
        for idx, it in enumerate(stmt):
            if idx != paren_at:
                self.tag_expr(it, scope)
        self.scan_stream(body.items, body_scope, "block")

    def handle_java_type(self, stmt: list, body: Group, scope: Scope) -> None:
        name_tok = None
        for idx, it in enumerate(stmt):
            if isinstance(it, Token) and it.kind == KW and \
                    it.text in (b"class", b"interface", b"enum") and idx + 1 < len(stmt) \
                    and _is_id(stmt[idx + 1]):
                name_tok = stmt[idx + 1]
                break
        self.tag_items(stmt, scope)
        if name_tok is not None:
            self.bind(scope, name_tok, TYPE)
        class_scope = self.new_scope(body.open_tok.start, body.close_tok.end, scope)
        self.scan_stream(body.items, class_scope, "class")

    def bind_params(self, params: Group, body_scope: Scope) -> None:
        self.tag_items(params.items, body_scope)
        for seg in split_top(params.items, b",", self.rules, skip_generics=self.rules.generics):
            seg = self._strip_annotations(seg, body_scope)
            seg = [x for x in seg if not (isinstance(x, Token) and x.kind == KW and
                                          x.text in self.rules.modifier_keywords)]
            if not seg:
                continue
            if len(seg) == 1 and (_is_kw(seg[0], b"void") or _is_punct(seg[0], b"...")):
                continue
            name_tok = self._last_top_level_id(seg)
            if name_tok is not None:
                self.bind(body_scope, name_tok, PARAM, initialized=True)
                continue
            # C function-pointer parameter: name hides inside the first group
            for it in seg:
                if _is_group(it, b"("):
                    inner = [x for x in it.items if _is_id(x)]
                    if inner:
                        self.bind(body_scope, inner[0], PARAM, initialized=True,
                                  extractable=False)
                    break

    def _last_top_level_id(self, seg: list) -> "Token | None":
        i = 0
        last = None
        while i < len(seg):
            j = match_generic(seg, i, self.rules)
            if j is not None:
                i = j
                continue
            if _is_id(seg[i]):
                last = seg[i]
            i += 1
        return last

    def _strip_annotations(self, seg: list, scope: Scope) -> list:
        out = []
        i = 0
        while i < len(seg):
            if _is_punct(seg[i], b"@") and i + 1 < len(seg) and _is_id(seg[i + 1]):
                self.consumed.add(seg[i + 1].index)
                i += 2
                if i < len(seg) and _is_group(seg[i], b"("):
                    self.tag_expr(seg[i], scope)
                    i += 1
                continue
            out.append(seg[i])
            i += 1
        return out

    # -- simple statements / declarations ---------------------------------

    def handle_simple_statement(self, stmt: list, scope: Scope, mode: str) -> None:
        if not stmt:
            return
        stmt = self._strip_labels(stmt)
        if not stmt:
            return
        var_kind = {"file": GLOBAL, "class": FIELD, "struct": FIELD}.get(mode, LOCAL)
        handled = self.try_declaration(stmt, scope, var_kind)
        if not handled:
            self.tag_items([x for x in stmt if isinstance(x, Group)], scope)

    def _strip_labels(self, stmt: list) -> list:
        while stmt:
            if len(stmt) >= 2 and _is_kw(stmt[0], b"default") and _is_punct(stmt[1], b":"):
                stmt = stmt[2:]
                continue
            if _is_kw(stmt[0], b"case"):
                for idx in range(1, len(stmt)):
                    if _is_punct(stmt[idx], b":"):
                        stmt = stmt[idx + 1:]
                        break
                else:
                    return stmt
                continue
            if len(stmt) >= 2 and _is_id(stmt[0]) and _is_punct(stmt[1], b":") \
                    and not (len(stmt) >= 3 and _is_punct(stmt[2], b":")):
                self.consumed.add(stmt[0].index)  # label definition
                stmt = stmt[2:]
                continue
            break
        return stmt

    def try_declaration(self, stmt: list, scope: Scope, var_kind: str, *,
                        default_init: bool = False) -> bool:
        """Parse `type declarator(, declarator)*`; returns True when recognized."""
        rules = self.rules
        items = self._strip_annotations(stmt, scope)
        i = 0
        n = len(items)
        is_typedef = False

        while i < n and isinstance(items[i], Token) and items[i].kind == KW and \
                items[i].text in rules.modifier_keywords:
            if items[i].text == b"typedef":
                is_typedef = True
            i += 1

        have_type = False
        # aggregate heads: struct/union/enum [tag] [ {members} ]
        if i < n and isinstance(items[i], Token) and items[i].kind == KW and \
                items[i].text in (b"struct", b"union", b"enum") and rules.name == "c":
            aggregate_kw = items[i].text
            i += 1
            if i < n and _is_id(items[i]):
                self.consumed.add(items[i].index)  # tag, separate namespace
                i += 1
            if i < n and _is_group(items[i], b"{"):
                body = items[i]
                member_scope = self.new_scope(body.open_tok.start, body.close_tok.end, scope)
                if aggregate_kw == b"enum":
                    self._scan_enum_body(body, member_scope)
                else:
                    self.scan_stream(body.items, member_scope, "struct")
                i += 1
            have_type = True
        elif i < n and isinstance(items[i], Token) and items[i].kind == KW and \
                items[i].text in rules.type_keywords:
            while i < n and isinstance(items[i], Token) and items[i].kind == KW and \
                    items[i].text in (rules.type_keywords | rules.modifier_keywords):
                i += 1
            have_type = True
        elif i < n and _is_id(items[i]):
            # IDENT[.IDENT]* [<generics>] as a type name; only if a declarator follows
            type_start = i
            j = i + 1
            while j + 1 < n and _is_punct(items[j], b".") and _is_id(items[j + 1]):
                j += 2
            g = match_generic(items, j, rules)
            generic_seen = g is not None
            if g is not None:
                j = g
            while j < n and _is_group(items[j], b"["):
                j += 1
            stars = 0
            while j < n and rules.name == "c" and _is_punct(items[j], b"*"):
                stars += 1
                j += 1
            if j < n and _is_id(items[j]):
                if stars > 0:
                    # `T *x` only trusted with an initializer; `a * b` is an expression
                    if not (j + 1 < n and _is_punct(items[j + 1], b"=")):
                        return False
                    i = j - stars
                else:
                    i = j
                have_type = True
                # type-position names are not variable uses
                for it in items[type_start:i]:
                    if isinstance(it, Token) and it.kind == ID:
                        self.consumed.add(it.index)
            elif generic_seen and j < n and _is_group(items[j], b"("):
                return False  # generic method call
            else:
                return False
        if not have_type:
            return False

        kind = TYPE if is_typedef else var_kind
        bound_any = False
        while i < n:
            # pointer stars
            while i < n and _is_punct(items[i], b"*"):
                i += 1
            if i < n and _is_group(items[i], b"("):
                # complex declarator (function pointer etc.): bind for scoping only
                inner = [x for x in items[i].items if _is_id(x)]
                self.tag_expr(items[i], scope)
                if inner:
                    self.bind(scope, inner[0], kind, extractable=False)
                    bound_any = True
                i += 1
                i = self._skip_declarator_tail(items, i, scope)
                if i < n and _is_punct(items[i], b","):
                    i += 1
                    continue
                break
            if not (i < n and _is_id(items[i])):
                break
            name_tok = items[i]
            i += 1
            while i < n and _is_group(items[i], b"["):
                self.tag_expr(items[i], scope)
                i += 1
            if i < n and _is_group(items[i], b"("):
                # function declarator / prototype
                self.tag_expr(items[i], scope)
                self.bind(scope, name_tok, FUNC)
                bound_any = True
                i += 1
                i = self._skip_declarator_tail(items, i, scope)
            elif i < n and _is_punct(items[i], b"="):
                i += 1
                i = self._consume_initializer(items, i, scope)
                self.bind(scope, name_tok, kind, initialized=True)
                bound_any = True
            else:
                self.bind(scope, name_tok, kind, initialized=default_init)
                bound_any = True
            if i < n and _is_punct(items[i], b","):
                i += 1
                continue
            break
        if i < n:
            self.tag_items([x for x in items[i:] if isinstance(x, Group)], scope)
        return bound_any

    def _skip_declarator_tail(self, items: list, i: int, scope: Scope) -> int:
        while i < len(items) and not _is_punct(items[i], b","):
            self.tag_expr(items[i], scope)
            i += 1
        return i

    def _consume_initializer(self, items: list, i: int, scope: Scope) -> int:
        n = len(items)
        while i < n:
            it = items[i]
            if _is_punct(it, b","):
                return i
            if _is_punct(it, b"<"):
                g = match_generic(items, i, self.rules)
                if g is not None:
                    i = g
                    continue
            self.tag_expr(it, scope)
            i += 1
        return i

    def _scan_enum_body(self, body: Group, scope: Scope) -> None:
        self.tag_items(body.items, scope)
        for seg in split_top(body.items, b",", self.rules):
            if seg and _is_id(seg[0]):
                self.bind(scope, seg[0], FIELD)

    # -- pass B: occurrence resolution -------------------------------------

    def resolve_occurrences(self) -> None:
        rules = self.rules
        toks = self.tokens
        for idx, tok in enumerate(toks):
            if tok.kind != ID:
                continue
            prev = toks[idx - 1] if idx > 0 else None
            nxt = toks[idx + 1] if idx + 1 < len(toks) else None
            if prev is not None:
                if prev.kind == PUNCT and prev.text in rules.member_ops:
                    self.member_access_names.add(tok.text.decode("ascii"))
                    continue
                if prev.kind == PUNCT and prev.text == b"@":
                    continue
                if prev.kind == KW and prev.text in (b"goto", b"break", b"continue",
                                                     b"struct", b"union", b"enum"):
                    continue
            if idx in self.consumed:
                continue
            if not rules.calls_use_variables and nxt is not None and \
                    _is_punct(nxt, b"("):
                continue
            scope = self.scope_of[idx] or self.file_scope
            binding = scope.resolve(tok.text.decode("ascii"), tok.start)
            if binding is None:
                continue
            binding.use_spans.append((tok.start, tok.end))
            if nxt is not None and _is_punct(nxt, b"=") and self._init_position(prev):
                binding.initialized = True

    @staticmethod
    def _init_position(prev: "Token | None") -> bool:
        if prev is None:
            return True
        if prev.kind == PUNCT and prev.text in _INIT_PREV_PUNCT:
            return True
        if prev.kind == KW and prev.text in (b"else", b"do"):
            return True
        return False


@dataclass
class CFamilyAnalysis:
    blob: bytes
    rules: Rules
    occurring_names: frozenset[str]
    fingerprint: tuple
    _scanner: Scanner = field(repr=False, default=None)
    _cache: dict = field(repr=False, default_factory=dict)

    def identifiers(self, include_parameters: bool) -> tuple[Identifier, ...]:
        if include_parameters not in self._cache:
            self._cache[include_parameters] = self._extract(include_parameters)
        return self._cache[include_parameters]

    def _extract(self, include_parameters: bool) -> tuple[Identifier, ...]:
        sc = self._scanner
        excluded = sc.field_names | sc.member_access_names | sc.macro_names
        groups: dict[str, list[Binding]] = {}
        for b in sc.all_bindings:
            if not b.extractable:
                continue
            if b.kind == LOCAL or (include_parameters and b.kind == PARAM):
                groups.setdefault(b.name, []).append(b)
        out = []
        for name, bindings in groups.items():
            if name in excluded:
                continue
            if not any(b.initialized for b in bindings):
                continue
            spans = sorted({s for b in bindings for s in (b.decl_spans + b.use_spans)})
            out.append(Identifier(name, tuple(OccurrenceSpan(s, e) for s, e in spans)))
        out.sort(key=lambda ident: (ident.first_offset, ident.name))
        return tuple(out)


def analyze(blob: bytes, rules: Rules) -> CFamilyAnalysis:
    tokens = lex(blob, rules)
    root = build_groups(tokens, rules)
    scanner = Scanner(blob, tokens, root, rules)
    scanner.run()

    names: set[str] = set()
    parts = []
    for tok in tokens:
        if tok.kind == ID:
            names.add(tok.text.decode("ascii"))
            parts.append((ID, None))
        else:
            if tok.kind == PREPROC:
                for m in _PREPROC_IDENT_RE.finditer(tok.text):
                    names.add(m.group().decode("ascii"))
            parts.append((tok.kind, tok.text))
    return CFamilyAnalysis(
        blob=blob,
        rules=rules,
        occurring_names=frozenset(names),
        fingerprint=tuple(parts),
        _scanner=scanner,
    )
