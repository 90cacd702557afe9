// SMT-LIB 2 pipe around the z3-solver WebAssembly package.
//
// Commands arrive on stdin, are evaluated against one persistent solver
// context, and the textual replies go to stdout.  State carries over
// between evaluations, so push/pop and incremental solving work exactly
// like a native solver process reading from standard input.
'use strict';

const { init } = require('z3-solver');

// Length of the longest prefix consisting of complete commands, or 0.
function completePrefix(text) {
  let depth = 0;
  let quote = null;
  let comment = false;
  let end = 0;
  let sawCommand = false;
  for (let i = 0; i < text.length; i++) {
    const ch = text[i];
    if (comment) {
      if (ch === '\n') comment = false;
      continue;
    }
    if (quote) {
      if (ch === quote) quote = null;
      continue;
    }
    if (ch === ';') comment = true;
    else if (ch === '|' || ch === '"') quote = ch;
    else if (ch === '(') depth += 1;
    else if (ch === ')') {
      depth -= 1;
      if (depth < 0) {
        process.stderr.write('unbalanced input\n');
        process.exit(2);
      }
      if (depth === 0) {
        end = i + 1;
        sawCommand = true;
      }
    }
  }
  return sawCommand ? end : 0;
}

async function main() {
  const { Z3 } = await init();
  const cfg = Z3.mk_config();
  const ctx = Z3.mk_context(cfg);
  Z3.del_config(cfg);

  let buffer = '';
  process.stdin.setEncoding('utf8');
  for await (const chunk of process.stdin) {
    buffer += chunk;
    const cut = completePrefix(buffer);
    if (cut === 0) continue;
    const batch = buffer.slice(0, cut);
    buffer = buffer.slice(cut);
    if (/\(\s*exit\s*\)/.test(batch)) {
      process.exit(0);
    }
    const out = await Z3.eval_smtlib2_string(ctx, batch);
    if (out && out.trim()) {
      process.stdout.write(out.trim() + '\n');
    }
  }
}

main().catch((err) => {
  process.stderr.write(String(err && err.stack ? err.stack : err) + '\n');
  process.exit(2);
});
