// Sandbox harness: hosts isolated interpreter realms for one analysis run.
//
// Protocol (JSON lines over stdio, this process is the passive side):
//   controller -> harness: one command object per line
//   harness -> controller: {"req":1,"payload":{...}} host-operation requests
//                          raised while a command runs, each answered by a
//                          single {"res":{...}} line, then finally one
//                          {"ok":true,...} / {"ok":false,"error":...} line.
//
// Guest code only ever sees realm-native functions; the host bridge lives
// in closures, and every value crossing the boundary is a JSON string or
// primitive, so realm code cannot reach host-realm intrinsics.

'use strict';

const fs = require('fs');
const path = require('path');
const vm = require('vm');

const PREAMBLE_SRC = fs.readFileSync(path.join(__dirname, 'preamble.js'), 'utf8');

let currentNowMs = 0;
let artifactKind = '';
let manifestJson = '{}';
let randState = 0x5eed1234 >>> 0;

const realms = new Map();

// Deterministic PRNG backing Math.random in every realm (mulberry32).
function nextRandom() {
  randState = (randState + 0x6d2b79f5) >>> 0;
  let t = randState;
  t = Math.imul(t ^ (t >>> 15), t | 1);
  t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
  return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
}

// ---- blocking line IO ------------------------------------------------------

let pending = '';
function readLine() {
  for (;;) {
    const nl = pending.indexOf('\n');
    if (nl >= 0) {
      const line = pending.slice(0, nl);
      pending = pending.slice(nl + 1);
      return line;
    }
    const buf = Buffer.alloc(1 << 16);
    let n;
    try {
      n = fs.readSync(0, buf, 0, buf.length, null);
    } catch (err) {
      if (err.code === 'EAGAIN') {
        // Pipe drained while nonblocking; back off briefly.
        Atomics.wait(new Int32Array(new SharedArrayBuffer(4)), 0, 0, 2);
        continue;
      }
      if (err.code === 'EOF') return null;
      throw err;
    }
    if (n === 0) return null;
    // Controller emits ASCII-only JSON, so byte chunks never split a rune.
    pending += buf.toString('utf8', 0, n);
  }
}

function writeLine(obj) {
  fs.writeSync(1, JSON.stringify(obj) + '\n');
}

function hostCall(payload) {
  writeLine({ req: 1, payload });
  for (;;) {
    const line = readLine();
    if (line === null) process.exit(3);
    let msg;
    try {
      msg = JSON.parse(line);
    } catch (e) {
      continue;
    }
    if (msg && typeof msg === 'object' && 'res' in msg) return msg.res;
  }
}

function recordEvent(realm, category, action, args, blocked, origin) {
  hostCall({
    op: 'event', realm, category, action,
    args: String(args == null ? '' : args),
    blocked: Boolean(blocked), origin: origin || '',
  });
}

// ---- realms ----------------------------------------------------------------

function createRealm(id, profile, extras) {
  const ctx = vm.createContext({}, {
    microtaskMode: 'afterEvaluate',
    codeGeneration: { strings: true, wasm: false },
  });
  const install = vm.runInContext('(' + PREAMBLE_SRC + ')', ctx, {
    filename: 'sandbox-preamble.js',
  });
  const helpers = {
    host: (s) => JSON.stringify(hostCall(Object.assign({ realm: id }, JSON.parse(s)))),
    atob: (s) => Buffer.from(String(s), 'base64').toString('binary'),
    btoa: (s) => Buffer.from(String(s), 'binary').toString('base64'),
    byteLen: (s) => Buffer.byteLength(String(s), 'utf8'),
    hexOfUtf8: (s) => Buffer.from(String(s), 'utf8').toString('hex'),
    now: () => currentNowMs,
    rand: () => nextRandom(),
    compile: (code, filename, params) =>
      vm.compileFunction(String(code), JSON.parse(params), {
        parsingContext: ctx,
        filename: String(filename),
      }),
  };
  const init = Object.assign(
    { id, profile, kind: artifactKind, manifest: manifestJson },
    extras || {}
  );
  const api = install(helpers, JSON.stringify(init));
  const realm = { id, profile, ctx, api };
  realms.set(id, realm);
  return realm;
}

function getRealm(id) {
  const realm = realms.get(id);
  if (!realm) throw new Error('unknown realm ' + id);
  return realm;
}

// Direct calls into realm functions bypass the context's afterEvaluate
// microtask draining; an empty evaluation flushes pending promise jobs.
function flushMicrotasks(realm) {
  try {
    vm.runInContext('undefined', realm.ctx, { filename: 'microtask-flush' });
  } catch (e) {
    // flush must never fail a command
  }
}

function errorText(err) {
  if (err && err.stack) return String(err.stack).split('\n').slice(0, 4).join(' | ');
  return String(err);
}

// ---- command dispatch ------------------------------------------------------

const handlers = {
  init(cmd) {
    currentNowMs = cmd.nowMs || 0;
    artifactKind = cmd.kind || '';
    manifestJson = cmd.manifest || '{}';
    if (typeof cmd.seed === 'number') randState = cmd.seed >>> 0;
    return { ok: true };
  },

  realm(cmd) {
    createRealm(cmd.id, cmd.profile, cmd.extras);
    return { ok: true };
  },

  eval(cmd) {
    const realm = getRealm(cmd.realm);
    try {
      vm.runInContext(cmd.code, realm.ctx, {
        filename: cmd.filename || '<guest>',
      });
      return { ok: true };
    } catch (err) {
      return { ok: true, error: errorText(err) };
    }
  },

  requireModule(cmd) {
    const realm = getRealm(cmd.realm);
    try {
      realm.api.requireEntry(cmd.path);
      return { ok: true };
    } catch (err) {
      return { ok: true, error: errorText(err) };
    } finally {
      flushMicrotasks(realm);
    }
  },

  invoke(cmd) {
    const realm = getRealm(cmd.realm);
    try {
      const missing = realm.api.invokeExport(cmd.name);
      return missing ? { ok: true, missing: true } : { ok: true };
    } catch (err) {
      return { ok: true, error: errorText(err) };
    } finally {
      flushMicrotasks(realm);
    }
  },

  fire(cmd) {
    const realm = getRealm(cmd.realm);
    const error = realm.api.fire(cmd.cb, Boolean(cmd.once));
    flushMicrotasks(realm);
    return error ? { ok: true, error } : { ok: true };
  },

  dispatch(cmd) {
    const realm = getRealm(cmd.realm);
    try {
      const count = realm.api.dispatch(cmd.event, cmd.argsJson || '[]');
      return { ok: true, listeners: count };
    } catch (err) {
      return { ok: true, listeners: 0, error: errorText(err) };
    } finally {
      flushMicrotasks(realm);
    }
  },

  shutdown() {
    process.exit(0);
  },
};

process.on('unhandledRejection', (reason) => {
  try {
    recordEvent('', 'lifecycle', 'unhandled-rejection', errorText(reason), false, '');
  } catch (e) {
    // best effort; never take the harness down for guest promise noise
  }
});

function main() {
  for (;;) {
    const line = readLine();
    if (line === null) return;
    let cmd;
    try {
      cmd = JSON.parse(line);
    } catch (e) {
      writeLine({ ok: false, error: 'unparseable command' });
      continue;
    }
    if (typeof cmd.nowMs === 'number') currentNowMs = cmd.nowMs;
    const handler = handlers[cmd.cmd];
    if (!handler) {
      writeLine({ ok: false, error: 'unknown command ' + cmd.cmd });
      continue;
    }
    let response;
    try {
      response = handler(cmd);
    } catch (err) {
      response = { ok: false, error: errorText(err) };
    }
    writeLine(response);
  }
}

main();
