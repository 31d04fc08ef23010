import init, { simulate_forecast, bayes_factor_trace, portfolio_backtest } from "./pkg/tvvar_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

function field(section, name) {
  const el = section.querySelector(`[name=${name}]`);
  if (el.type === "checkbox") return el.checked;
  if (name === "lags") return el.value.split(",").map(Number);
  return Number(el.value);
}

// series: [{x, y, color, dash}]
function plot(canvas, series) {
  const dpr = window.devicePixelRatio || 1;
  const w = canvas.clientWidth, h = canvas.clientHeight;
  canvas.width = w * dpr;
  canvas.height = h * dpr;
  const ctx = canvas.getContext("2d");
  ctx.scale(dpr, dpr);
  ctx.clearRect(0, 0, w, h);
  const xs = series.flatMap(s => s.x), ys = series.flatMap(s => s.y).filter(Number.isFinite);
  if (!ys.length) return;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const pad = 40;
  const px = x => pad + (x - x0) / (x1 - x0 || 1) * (w - pad - 10);
  const py = y => h - 20 - (y - y0) / (y1 - y0) * (h - 30);
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.strokeRect(pad, 10, w - pad - 10, h - 30);
  ctx.fillText(y1.toPrecision(3), 2, 18);
  ctx.fillText(y0.toPrecision(3), 2, h - 20);
  ctx.fillText(String(x0), pad, h - 6);
  ctx.fillText(String(x1), w - 40, h - 6);
  if (y0 < 0 && y1 > 0) {
    ctx.beginPath();
    ctx.moveTo(pad, py(0));
    ctx.lineTo(w - 10, py(0));
    ctx.stroke();
  }
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash ? [4, 3] : []);
    ctx.beginPath();
    s.y.forEach((y, i) => (i ? ctx.lineTo(px(s.x[i]), py(y)) : ctx.moveTo(px(s.x[i]), py(y))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function legend(section, items) {
  section.querySelector(".legend").innerHTML =
    items.map(([label, color]) => `<span style="color:${color}">&#9632; ${label}</span>`).join("");
}

const range = (start, n) => Array.from({ length: n }, (_, i) => start + i);

function guarded(section, fn) {
  const msg = section.querySelector(".msg");
  msg.className = "msg";
  msg.textContent = "";
  try {
    fn(msg);
  } catch (e) {
    msg.className = "msg err";
    msg.textContent = String(e);
  }
}

function runForecast() {
  const s = document.getElementById("fc");
  guarded(s, () => {
    const out = JSON.parse(simulate_forecast(JSON.stringify({
      sim: { n: field(s, "n"), lags: field(s, "lags"), stochastic_vol: field(s, "stochastic_vol"), seed: field(s, "seed") },
      d: field(s, "d"), delta: field(s, "delta"), beta: field(s, "beta"), horizon: field(s, "horizon"),
    })));
    const n = out.series[0].length, tail = Math.min(80, n);
    const hx = range(n + 1, out.mean[0].length);
    const a = [], b = [];
    out.series.forEach((y, j) => {
      const c = COLORS[j];
      a.push({ x: range(n - tail + 1, tail), y: y.slice(n - tail), color: c });
      a.push({ x: hx, y: out.mean[j], color: c });
      a.push({ x: hx, y: out.lower[j], color: c, dash: true });
      a.push({ x: hx, y: out.upper[j], color: c, dash: true });
      b.push({ x: range(out.first_t, out.vol_sd[j].length), y: out.vol_sd[j], color: c });
      b.push({ x: range(out.true_first_t, out.true_vol_sd[j].length), y: out.true_vol_sd[j], color: c, dash: true });
    });
    plot(s.querySelector(".a"), a);
    plot(s.querySelector(".b"), b);
    legend(s, out.series.map((_, j) => [`y${j + 1}`, COLORS[j]]).concat([["dashed: 90% band / true volatility", "#555"]]));
  });
}

function runBayes() {
  const s = document.getElementById("bf");
  guarded(s, msg => {
    const out = JSON.parse(bayes_factor_trace(JSON.stringify({
      sim: { n: field(s, "n"), lags: field(s, "lags"), seed: field(s, "seed") },
      d_a: field(s, "d_a"), d_b: field(s, "d_b"), delta: field(s, "delta"), beta: field(s, "beta"),
    })));
    plot(s.querySelector(".a"), [{ x: out.t, y: out.cumulative_log_bayes_factor, color: COLORS[0] }]);
    legend(s, [["cumulative log Bayes factor, A over B", COLORS[0]]]);
    msg.textContent = `mean log Bayes factor per step: ${out.mean_log_bayes_factor.toFixed(4)}`;
  });
}

function runBacktest() {
  const s = document.getElementById("bt");
  guarded(s, msg => {
    const out = JSON.parse(portfolio_backtest(JSON.stringify({
      sim: { p: field(s, "p"), n: field(s, "n"), intercept: field(s, "intercept"), seed: field(s, "seed") },
      delta: field(s, "delta"), beta: field(s, "beta"), target: field(s, "target"), compound: field(s, "compound"),
    })));
    plot(s.querySelector(".a"), out.paths.map((p, i) => ({ x: out.t, y: p.cumulative, color: COLORS[i] })));
    legend(s, out.paths.map((p, i) => [p.strategy, COLORS[i]]));
    msg.textContent = out.paths
      .map(p => `${p.strategy}: 100 x mean cumulative return ${p.summary.toFixed(4)}  (${p.flagged} infeasible steps)`)
      .join("\n");
  });
}

await init();
for (const [id, fn] of [["fc", runForecast], ["bf", runBayes], ["bt", runBacktest]]) {
  document.querySelector(`#${id} button`).addEventListener("click", fn);
  fn();
}
