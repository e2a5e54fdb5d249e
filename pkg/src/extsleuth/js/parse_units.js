// Batch ECMAScript fact extractor.
//
// stdin:  {"units": [{"path": "...", "text": "..."}]}
// stdout: {"results": [{"path", "status", "callSites", "stringLiterals", "aliases"}]}
//
// Each unit is parsed independently; a syntax error marks that unit
// "parse-failed" and never aborts the batch.

'use strict';

const fs = require('fs');
const path = require('path');
const acorn = require(path.join(__dirname, 'vendor', 'acorn.js'));

const MAX_PARSE_BYTES = 5 * 1024 * 1024;
const MAX_ARG_LITERAL = 512;
const MAX_FACTS_PER_UNIT = 20000;

function parseText(text) {
  const base = { ecmaVersion: 'latest', locations: true, ranges: true };
  try {
    return acorn.parse(text, { ...base, sourceType: 'script', allowReturnOutsideFunction: true });
  } catch (e) {
    return acorn.parse(text, { ...base, sourceType: 'module' });
  }
}

function walk(node, visit) {
  if (!node || typeof node.type !== 'string') return;
  visit(node);
  for (const key of Object.keys(node)) {
    if (key === 'loc') continue;
    const child = node[key];
    if (Array.isArray(child)) {
      for (const c of child) {
        if (c && typeof c.type === 'string') walk(c, visit);
      }
    } else if (child && typeof child.type === 'string') {
      walk(child, visit);
    }
  }
}

function unwrapChain(node) {
  return node && node.type === 'ChainExpression' ? node.expression : node;
}

// Dotted path for identifier/member chains; null when the callee is not a chain.
function calleePath(node) {
  node = unwrapChain(node);
  if (!node) return null;
  if (node.type === 'Identifier') return node.name;
  if (node.type === 'MemberExpression') {
    // require('mod').member chains resolve to the module name directly
    let objectPath = requireTarget(node.object);
    if (objectPath === null) objectPath = calleePath(node.object);
    if (objectPath === null) return null;
    if (!node.computed && node.property.type === 'Identifier') {
      return objectPath + '.' + node.property.name;
    }
    if (node.computed && node.property.type === 'Literal' &&
        typeof node.property.value === 'string') {
      return objectPath + '.' + node.property.value;
    }
    return null;
  }
  return null;
}

function cookedString(node) {
  if (node.type === 'Literal' && typeof node.value === 'string') return node.value;
  if (node.type === 'TemplateLiteral' && node.expressions.length === 0 &&
      node.quasis.length === 1 && typeof node.quasis[0].value.cooked === 'string') {
    return node.quasis[0].value.cooked;
  }
  return null;
}

function argLiterals(args) {
  const out = [];
  for (const arg of args) {
    walk(arg, (n) => {
      if (out.length >= 32) return;
      const s = cookedString(n);
      if (s !== null) out.push(s.slice(0, MAX_ARG_LITERAL));
    });
  }
  return out;
}

function requireTarget(node) {
  node = unwrapChain(node);
  if (node && node.type === 'CallExpression' &&
      node.callee.type === 'Identifier' && node.callee.name === 'require' &&
      node.arguments.length >= 1) {
    const t = cookedString(node.arguments[0]);
    if (t !== null) return t;
  }
  return null;
}

function collectAliases(ast, aliases) {
  walk(ast, (node) => {
    if (node.type === 'VariableDeclarator' && node.init) {
      const target = requireTarget(node.init);
      if (target === null) return;
      if (node.id.type === 'Identifier') {
        aliases[node.id.name] = target;
      } else if (node.id.type === 'ObjectPattern') {
        for (const prop of node.id.properties) {
          if (prop.type === 'Property' && prop.key.type === 'Identifier' &&
              prop.value.type === 'Identifier') {
            aliases[prop.value.name] = target + '.' + prop.key.name;
          }
        }
      }
    } else if (node.type === 'ImportDeclaration') {
      const target = node.source.value;
      if (typeof target !== 'string') return;
      for (const spec of node.specifiers) {
        if (spec.type === 'ImportDefaultSpecifier' || spec.type === 'ImportNamespaceSpecifier') {
          aliases[spec.local.name] = target;
        } else if (spec.type === 'ImportSpecifier' && spec.imported.type === 'Identifier') {
          aliases[spec.local.name] = target + '.' + spec.imported.name;
        }
      }
    }
  });
}

// True when a subtree reads the current time: Date.now(), new Date() with no
// arguments, or a .getTime() call on either of those.
function isDateRead(node) {
  let found = false;
  walk(node, (n) => {
    if (found) return;
    if (n.type === 'CallExpression' && calleePath(n.callee) === 'Date.now') found = true;
    if (n.type === 'NewExpression' && calleePath(n.callee) === 'Date' &&
        n.arguments.length === 0) found = true;
  });
  return found;
}

// Single-assignment literal consts (const WHEN = 1748736000000) resolve when
// they appear in comparisons, so logic-bomb thresholds hidden behind a name
// are still literal-visible.
function collectConstLiterals(ast) {
  const consts = new Map();
  walk(ast, (node) => {
    if (node.type !== 'VariableDeclarator' || !node.init ||
        node.id.type !== 'Identifier') return;
    const s = cookedString(node.init);
    if (s !== null) {
      consts.set(node.id.name, { kind: 'string', value: s });
    } else if (node.init.type === 'Literal' && typeof node.init.value === 'number') {
      consts.set(node.id.name, { kind: 'number', value: node.init.value });
    }
  });
  return consts;
}

function literalsIn(node, consts) {
  const strings = [];
  const numbers = [];
  walk(node, (n) => {
    const s = cookedString(n);
    if (s !== null) {
      strings.push(s.slice(0, MAX_ARG_LITERAL));
    } else if (n.type === 'Literal' && typeof n.value === 'number') {
      numbers.push(n.value);
    } else if (n.type === 'Identifier' && consts && consts.has(n.name)) {
      const resolved = consts.get(n.name);
      if (resolved.kind === 'string') strings.push(resolved.value.slice(0, MAX_ARG_LITERAL));
      else numbers.push(resolved.value);
    }
  });
  return { strings, numbers };
}

function extractFacts(text) {
  const ast = parseText(text);
  const callSites = [];
  const stringLiterals = [];
  const dateComparisons = [];
  const aliases = {};
  collectAliases(ast, aliases);
  const consts = collectConstLiterals(ast);
  walk(ast, (node) => {
    if (node.type === 'BinaryExpression' && ['<', '>', '<=', '>='].includes(node.operator)) {
      const leftIsDate = isDateRead(node.left);
      const rightIsDate = isDateRead(node.right);
      if (leftIsDate !== rightIsDate && dateComparisons.length < MAX_FACTS_PER_UNIT) {
        const other = leftIsDate ? node.right : node.left;
        dateComparisons.push({
          ...literalsIn(other, consts),
          line: node.loc.start.line,
          col: node.loc.start.column,
          start: node.range[0],
          end: node.range[1],
        });
      }
    }
    if (node.type === 'CallExpression' || node.type === 'NewExpression') {
      if (callSites.length >= MAX_FACTS_PER_UNIT) return;
      const callee = calleePath(node.callee);
      if (callee !== null) {
        callSites.push({
          callee,
          args: argLiterals(node.arguments),
          line: node.loc.start.line,
          col: node.loc.start.column,
          start: node.range[0],
          end: node.range[1],
        });
      }
    } else {
      const value = cookedString(node);
      if (value !== null && stringLiterals.length < MAX_FACTS_PER_UNIT) {
        stringLiterals.push({
          value,
          line: node.loc.start.line,
          col: node.loc.start.column,
          start: node.range[0],
          end: node.range[1],
        });
      }
    }
  });
  return { callSites, stringLiterals, dateComparisons, aliases };
}

function main() {
  const input = JSON.parse(fs.readFileSync(0, 'utf8'));
  const results = [];
  for (const unit of input.units) {
    if (Buffer.byteLength(unit.text, 'utf8') > MAX_PARSE_BYTES) {
      results.push({ path: unit.path, status: 'parse-failed',
                     callSites: [], stringLiterals: [], aliases: {} });
      continue;
    }
    try {
      const facts = extractFacts(unit.text);
      results.push({ path: unit.path, status: 'parsed', ...facts });
    } catch (e) {
      results.push({ path: unit.path, status: 'parse-failed',
                     callSites: [], stringLiterals: [], aliases: {} });
    }
  }
  process.stdout.write(JSON.stringify({ results }));
}

main();
