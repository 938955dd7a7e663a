/**
 * Offense-code expression builder.
 *
 * The form models an expression as chip groups: codes inside a group are
 * OR'd, groups are AND'd, which covers the working pattern
 * "PC12022 AND (PC211 OR PC212)". Serialization targets the service's
 * text grammar (keywords AND/OR/NOT, parentheses, precedence NOT > AND >
 * OR); the parser here mirrors that grammar so expressions round-trip and
 * arbitrary server-side expressions can still be displayed.
 */

export type ExprNode =
  | { code: string }
  | { and: ExprNode[] }
  | { or: ExprNode[] }
  | { not: ExprNode };

export interface ChipGroup {
  chips: string[];
}

const CODE_RE = /^[A-Za-z][A-Za-z0-9.\-]*$/;
const KEYWORDS = new Set(["AND", "OR", "NOT"]);

export function isValidCode(code: string): boolean {
  const trimmed = code.trim();
  return CODE_RE.test(trimmed) && !KEYWORDS.has(trimmed.toUpperCase());
}

export class ExprSyntaxError extends Error {}

/** Chip groups -> grammar text. Empty groups are dropped; codes uppercase. */
export function serializeChips(groups: ChipGroup[]): string {
  const parts: string[] = [];
  for (const group of groups) {
    const codes = group.chips.map((c) => c.trim().toUpperCase()).filter(Boolean);
    if (codes.length === 0) continue;
    for (const code of codes) {
      if (!isValidCode(code)) {
        throw new ExprSyntaxError(`invalid offense code: ${JSON.stringify(code)}`);
      }
    }
    parts.push(codes.length === 1 ? codes[0]! : `(${codes.join(" OR ")})`);
  }
  return parts.join(" AND ");
}

/** Parse the service grammar into a tree. Throws ExprSyntaxError. */
export function parseExpr(text: string): ExprNode {
  const tokens = tokenize(text);
  if (tokens.length === 0) throw new ExprSyntaxError("empty expression");
  let idx = 0;

  const peek = (): string | undefined => tokens[idx];
  const take = (): string => tokens[idx++]!;

  function parseOr(): ExprNode {
    const operands = [parseAnd()];
    while (peek()?.toUpperCase() === "OR") {
      take();
      operands.push(parseAnd());
    }
    return operands.length === 1 ? operands[0]! : { or: operands };
  }

  function parseAnd(): ExprNode {
    const operands = [parseNot()];
    while (peek()?.toUpperCase() === "AND") {
      take();
      operands.push(parseNot());
    }
    return operands.length === 1 ? operands[0]! : { and: operands };
  }

  function parseNot(): ExprNode {
    if (peek()?.toUpperCase() === "NOT") {
      take();
      return { not: parseNot() };
    }
    return parseAtom();
  }

  function parseAtom(): ExprNode {
    const tok = peek();
    if (tok === undefined) throw new ExprSyntaxError("expression ended unexpectedly");
    if (tok === "(") {
      take();
      const inner = parseOr();
      if (peek() !== ")") throw new ExprSyntaxError("missing closing parenthesis");
      take();
      return inner;
    }
    if (tok === ")") throw new ExprSyntaxError("unexpected closing parenthesis");
    take();
    return { code: tok.toUpperCase() };
  }

  const node = parseOr();
  if (idx !== tokens.length) {
    throw new ExprSyntaxError(`trailing tokens after expression: ${tokens.slice(idx).join(" ")}`);
  }
  return node;
}

function tokenize(text: string): string[] {
  const tokens: string[] = [];
  let pos = 0;
  while (pos < text.length) {
    const ch = text[pos]!;
    if (/\s/.test(ch)) {
      pos += 1;
    } else if (ch === "(" || ch === ")") {
      tokens.push(ch);
      pos += 1;
    } else {
      const m = /^[A-Za-z][A-Za-z0-9.\-]*/.exec(text.slice(pos));
      if (!m) throw new ExprSyntaxError(`unexpected character at ${pos}: ${ch}`);
      tokens.push(m[0]);
      pos += m[0].length;
    }
  }
  return tokens;
}

/** Tree -> grammar text, fully parenthesized below the top level. */
export function exprToText(node: ExprNode): string {
  if ("code" in node) return node.code;
  if ("not" in node) return `NOT ${wrap(node.not)}`;
  if ("and" in node) return node.and.map(wrap).join(" AND ");
  return node.or.map(wrap).join(" OR ");
}

function wrap(node: ExprNode): string {
  return "code" in node ? node.code : `(${exprToText(node)})`;
}

/**
 * Tree -> chip groups when the shape fits the builder (AND of codes /
 * OR-of-code groups); null otherwise, in which case the form shows the
 * raw expression text instead of chips.
 */
export function exprToChips(node: ExprNode): ChipGroup[] | null {
  const groups = "and" in node ? node.and : [node];
  const out: ChipGroup[] = [];
  for (const part of groups) {
    if ("code" in part) {
      out.push({ chips: [part.code] });
    } else if ("or" in part && part.or.every((p) => "code" in p)) {
      out.push({ chips: part.or.map((p) => (p as { code: string }).code) });
    } else {
      return null;
    }
  }
  return out;
}
