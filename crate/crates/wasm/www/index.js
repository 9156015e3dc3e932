import init, { quantile_cdf_overlay, ks_comparison, mechanism_outcome } from "./pkg/advsel_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

function guarded(outId, fn) {
  return () => {
    const out = $(outId);
    out.classList.remove("err");
    try {
      fn(out);
    } catch (e) {
      out.classList.add("err");
      out.textContent = String(e.message ?? e);
    }
  };
}

function axes(ctx, w, h, pad) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
}

// Step plot of two CDFs against population values.
function drawOverlay(data) {
  const c = $("ov-canvas"), ctx = c.getContext("2d"), pad = 30;
  axes(ctx, c.width, c.height, pad);
  const xs = data.values, lo = xs[0], hi = xs[xs.length - 1] || lo + 1;
  const X = (v) => pad + ((v - lo) / (hi - lo || 1)) * (c.width - 2 * pad);
  const Y = (p) => c.height - pad - p * (c.height - 2 * pad);
  [["fx", COLORS[0]], ["fy", COLORS[1]]].forEach(([key, color]) => {
    ctx.strokeStyle = color;
    ctx.beginPath();
    ctx.moveTo(X(lo), Y(0));
    let prev = 0;
    xs.forEach((v, i) => {
      ctx.lineTo(X(v), Y(prev));
      ctx.lineTo(X(v), Y(data[key][i]));
      prev = data[key][i];
    });
    ctx.stroke();
  });
  ctx.fillStyle = COLORS[0]; ctx.fillText("population", pad + 5, pad + 12);
  ctx.fillStyle = COLORS[1]; ctx.fillText("quantile sample", pad + 80, pad + 12);
}

// One row of jittered dots per mechanism on a shared KS axis.
function drawKs(data) {
  const c = $("ks-canvas"), ctx = c.getContext("2d"), pad = 30, left = 150;
  axes(ctx, c.width, c.height, pad);
  const all = data.ks.flatMap((r) => r.ks);
  const hi = Math.max(...all, 1e-9);
  const X = (v) => left + (v / hi) * (c.width - left - pad);
  const rowH = (c.height - 2 * pad) / data.ks.length;
  data.ks.forEach((row, r) => {
    const y0 = pad + rowH * (r + 0.5);
    ctx.fillStyle = "#000";
    ctx.fillText(row.mechanism, pad + 4, y0 + 4);
    ctx.fillStyle = COLORS[r % COLORS.length];
    row.ks.forEach((v, i) => {
      const jitter = (((i * 7919) % 97) / 97 - 0.5) * rowH * 0.6;
      ctx.fillRect(X(v) - 1, y0 + jitter - 1, 2, 2);
    });
  });
  ctx.fillStyle = "#000";
  ctx.fillText("0", left, c.height - pad + 12);
  ctx.fillText(hi.toFixed(3), c.width - pad - 30, c.height - pad + 12);
}

function fmtStats(s) {
  return ["ks", "l1", "cvm"].map((k) => `${k} = ${s[k].exact} (${s[k].decimal})`).join("\n");
}

await init();

$("ov-go").onclick = guarded("ov-out", (out) => {
  const data = JSON.parse(quantile_cdf_overlay(num("ov-n"), num("ov-k"), num("ov-seed")));
  drawOverlay(data);
  out.textContent = `m = ${data.m}, positions ${data.positions.join(" ")}\n${fmtStats(data.stats)}`;
});

$("ks-go").onclick = guarded("ks-out", (out) => {
  const data = JSON.parse(ks_comparison(num("ks-reps"), num("ks-seed"), num("ks-nstar")));
  drawKs(data);
  out.textContent = data.summary
    .map((s) => `${s.mechanism.padEnd(20)} mean ${s.mean.decimal}  median ${s.median.decimal}  max ${s.max.decimal}`)
    .join("\n");
});

$("mo-go").onclick = guarded("mo-out", (out) => {
  const data = JSON.parse(
    mechanism_outcome($("mo-mech").value, num("mo-n"), num("mo-k"), num("mo-c"), $("mo-cut").value, num("mo-seed")),
  );
  out.textContent = `positions ${data.positions.join(" ")}\n${fmtStats(data.stats)}\n\n` + JSON.stringify(data.transcript, null, 1);
});

$("ov-go").click();
