import init, { preset_names, simulate, potential_curve, y_flow_trace } from "./pkg/scalar_collapse_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);

function fill(select, names, chosen) {
  for (const n of names) {
    const o = document.createElement("option");
    o.value = o.textContent = n;
    select.appendChild(o);
  }
  select.value = chosen;
}

function bounds(values) {
  const finite = values.filter(Number.isFinite);
  if (finite.length === 0) return [0, 1];
  let lo = Math.min(...finite), hi = Math.max(...finite);
  if (hi - lo < 1e-12) { lo -= 0.5; hi += 0.5; }
  const pad = 0.05 * (hi - lo);
  return [lo - pad, hi + pad];
}

// Line chart of one or more series sharing x; marks are [x, y] dots.
function chart(canvas, xs, series, { label = "", xLabel = "", marks = [], hline = null } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, L = 60, R = 10, T = 10, B = 28;
  ctx.clearRect(0, 0, W, H);
  const [x0, x1] = bounds(xs);
  const [y0, y1] = bounds(series.flatMap((s) => s.ys).concat(hline === null ? [] : [hline]));
  const px = (x) => L + ((x - x0) / (x1 - x0)) * (W - L - R);
  const py = (y) => H - B - ((y - y0) / (y1 - y0)) * (H - T - B);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(L, T, W - L - R, H - T - B);
  ctx.fillStyle = "#333";
  ctx.font = "12px sans-serif";
  for (let i = 0; i <= 4; i++) {
    const y = y0 + ((y1 - y0) * i) / 4, x = x0 + ((x1 - x0) * i) / 4;
    ctx.fillText(y.toPrecision(3), 4, py(y) + 4);
    ctx.fillText(x.toPrecision(3), px(x) - 12, H - 8);
  }
  ctx.fillText(label, L + 6, T + 14);
  ctx.fillText(xLabel, W - R - 20, H - B - 6);

  if (hline !== null) {
    ctx.strokeStyle = "#bbb";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(L, py(hline));
    ctx.lineTo(W - R, py(hline));
    ctx.stroke();
    ctx.setLineDash([]);
  }
  for (const s of series) {
    ctx.strokeStyle = s.color || "#1f5fbf";
    ctx.beginPath();
    let pen = false;
    xs.forEach((x, i) => {
      const y = s.ys[i];
      if (!Number.isFinite(y)) { pen = false; return; }
      pen ? ctx.lineTo(px(x), py(y)) : ctx.moveTo(px(x), py(y));
      pen = true;
    });
    ctx.stroke();
  }
  ctx.fillStyle = "#c33";
  for (const [x, y] of marks) {
    ctx.beginPath();
    ctx.arc(px(x), py(y), 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function report(id, fn) {
  const el = $(id);
  el.classList.remove("error");
  try {
    el.textContent = fn();
  } catch (e) {
    el.classList.add("error");
    el.textContent = String(e.message || e);
  }
}

function runSimulation() {
  report("sim-status", () => {
    const r = JSON.parse(simulate($("sim-preset").value, num("sim-phi"), num("sim-v"),
      parseInt($("sim-chi").value, 10), $("sim-scenario").checked, num("sim-tmax")));
    const s = r.series;
    chart($("sim-phi-plot"), s.t, [{ ys: s.phi }], { label: "φ", xLabel: "t" });
    chart($("sim-eps-plot"), s.t, [{ ys: s.log10_eps }], { label: "log₁₀ ε", xLabel: "t" });
    chart($("sim-a-plot"), s.t, [{ ys: s.a }], { label: "a", xLabel: "t" });
    const lines = [
      `potential ${r.potential}, φ₀ = ${r.phi0.toPrecision(6)}, φ̇₀ = ${r.v0.toPrecision(6)}, χ = ${r.chi}`,
      `termination: ${r.termination}`,
    ];
    if (r.t_s !== null) lines.push(`t_s = ${r.t_s.toFixed(5)}, ρ∞ = ${r.rho_inf === null ? "n/a" : r.rho_inf.toExponential(2)}`);
    lines.push(`outcome: ${r.verdict}`);
    if (r.reading) lines.push(`reading: ${r.reading}`);
    return lines.join("\n");
  });
}

function runPotential() {
  report("pot-status", () => {
    const r = JSON.parse(potential_curve($("pot-preset").value, num("pot-lo"), num("pot-hi"), 800));
    const marks = r.critical_points.map((c) => [c.phi, c.value]);
    chart($("pot-plot"), r.phi, [{ ys: r.v }], { label: "V", xLabel: "φ", marks });
    return r.critical_points.map((c) => `${c.kind} at φ = ${c.phi.toPrecision(6)}, V = ${c.value.toPrecision(6)}`).join("\n")
      || "no critical points in range";
  });
}

function runFlow() {
  report("y-status", () => {
    const r = JSON.parse(y_flow_trace($("y-preset").value, num("y-phi"), num("y-y"), num("y-max")));
    chart($("y-plot"), r.phi, [{ ys: r.y }], { label: "y", xLabel: "φ", hline: 1 });
    return `case: ${r.case.replaceAll("_", " ")}`;
  });
}

await init();
const names = JSON.parse(preset_names());
const all = [...names.scenarios, ...names.potentials.filter((n) => !names.scenarios.includes(n))];
fill($("sim-preset"), all, "figure1");
fill($("pot-preset"), all, "figure1");
fill($("y-preset"), names.potentials, "quartic");
$("sim-run").onclick = runSimulation;
$("pot-run").onclick = runPotential;
$("y-run").onclick = runFlow;
runSimulation();
runPotential();
runFlow();
