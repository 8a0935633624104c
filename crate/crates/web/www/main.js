import init, { selectionFrequencies, runSearch, updateCurves } from "./pkg/antnas_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const list = (id) => $(id).value.split(",").map((s) => s.trim()).filter(Boolean).map(Number);

function call(fn, request, errorId) {
  $(errorId).textContent = "";
  try {
    return JSON.parse(fn(JSON.stringify(request)));
  } catch (e) {
    $(errorId).textContent = String(e);
    return null;
  }
}

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "12px system-ui, sans-serif";
  return ctx;
}

// 1. Selection rule

function drawSelection() {
  $("sel-q0-out").value = $("sel-q0").value;
  const pheromone = list("sel-tau");
  const heuristic = list("sel-eta");
  const report = call(selectionFrequencies, {
    pheromone,
    heuristic: heuristic.length ? heuristic : null,
    greediness: num("sel-q0"),
    beta: num("sel-beta"),
    draws: num("sel-draws"),
    seed: num("sel-seed"),
  }, "sel-error");
  const canvas = $("sel-canvas");
  const ctx = clear(canvas);
  if (!report) return;
  const n = report.empirical.length;
  const pad = 30, h = canvas.height - 2 * pad;
  const slot = (canvas.width - 2 * pad) / n;
  const bar = Math.min(40, slot / 3);
  for (let i = 0; i < n; i++) {
    const x = pad + i * slot + slot / 2;
    [[report.empirical[i], "#4a7fd4", -bar], [report.theoretical[i], "#e0a030", 0]].forEach(([p, color, dx]) => {
      ctx.fillStyle = color;
      ctx.fillRect(x + dx, pad + h * (1 - p), bar, h * p);
    });
    ctx.fillStyle = "#222";
    ctx.textAlign = "center";
    ctx.fillText(`#${i}${i === report.argmax ? " (argmax)" : ""}`, x, canvas.height - 10);
    ctx.fillText(`${report.empirical[i].toFixed(3)} / ${report.theoretical[i].toFixed(3)}`, x, pad + h * (1 - Math.max(report.empirical[i], report.theoretical[i])) - 4);
  }
}

// 2. Search run

let rounds = [];
let target = "";

function nodePositions(graph, canvas) {
  const byDepth = new Map();
  graph.nodes.forEach((node, id) => {
    if (!byDepth.has(node.depth)) byDepth.set(node.depth, []);
    byDepth.get(node.depth).push(id);
  });
  const depths = Math.max(...byDepth.keys()) + 1;
  const dx = (canvas.width - 120) / Math.max(1, depths - 1);
  const pos = [];
  for (const [depth, ids] of byDepth) {
    const dy = (canvas.height - 40) / (ids.length + 1);
    ids.forEach((id, row) => { pos[id] = [60 + depth * dx, 20 + dy * (row + 1)]; });
  }
  return pos;
}

function drawRound() {
  const canvas = $("run-canvas");
  const ctx = clear(canvas);
  if (!rounds.length) return;
  const index = num("run-round") - 1;
  const snap = rounds[index];
  $("run-round-out").value = `${snap.round}/${rounds.length}`;
  const graph = snap.graph;
  const pos = nodePositions(graph, canvas);
  const maxTau = Math.max(...graph.edges.map((e) => e.pheromone));
  const best = new Set(snap.best_nodes);
  const onBest = (e) => best.has(e.from) && best.has(e.to) &&
    snap.best_nodes.indexOf(e.to) === snap.best_nodes.indexOf(e.from) + 1;

  for (const e of graph.edges) {
    const [x1, y1] = pos[e.from], [x2, y2] = pos[e.to];
    ctx.strokeStyle = onBest(e) ? "rgba(42,157,92,0.9)" : "rgba(74,127,212,0.55)";
    ctx.lineWidth = 0.5 + 6 * e.pheromone / maxTau;
    ctx.beginPath();
    ctx.moveTo(x1, y1);
    ctx.lineTo(x2, y2);
    ctx.stroke();
  }
  graph.nodes.forEach((node, id) => {
    const [x, y] = pos[id];
    ctx.fillStyle = best.has(id) ? "#2a9d5c" : "#fff";
    ctx.strokeStyle = "#333";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.arc(x, y, 6, 0, 2 * Math.PI);
    ctx.fill();
    ctx.stroke();
    ctx.fillStyle = "#222";
    ctx.textAlign = "center";
    ctx.fillText(node.kind, x, y - 10);
  });

  const ants = snap.ants
    .map((a) => `  ant ${a.ant}: ${a.score.toFixed(4)}  ${a.architecture}`)
    .join("\n");
  $("run-info").textContent =
    `target:      ${target}\nincumbent:   ${snap.best_score.toFixed(4)}  ${snap.best_architecture}\n` +
    `graph:       ${graph.nodes.length} nodes, ${graph.edges.length} edges\nround ${snap.round} ants:\n${ants}`;
}

function doSearch() {
  const report = call(runSearch, {
    ant_count: num("run-ants"),
    max_depth: num("run-depth"),
    greediness: num("run-q0"),
    seed: num("run-seed"),
    landscape_seed: num("run-lseed"),
  }, "run-error");
  if (!report) return;
  rounds = report.rounds;
  target = report.target;
  const slider = $("run-round");
  slider.max = rounds.length;
  slider.value = rounds.length;
  slider.disabled = false;
  drawRound();
}

// 3. Update curves

function drawCurves() {
  const curves = call(updateCurves, {
    start: num("upd-start"),
    rho: num("upd-rho"),
    alpha: num("upd-alpha"),
    tau0: num("upd-tau0"),
    best_score: num("upd-best"),
    steps: num("upd-steps"),
  }, "upd-error");
  const canvas = $("upd-canvas");
  const ctx = clear(canvas);
  if (!curves) return;
  const series = [[curves.local, "#4a7fd4"], [curves.global_on, "#2a9d5c"], [curves.global_off, "#c0392b"]];
  const all = series.flatMap(([s]) => s);
  const top = Math.max(...all) * 1.05 || 1;
  const pad = 35, w = canvas.width - 2 * pad, h = canvas.height - 2 * pad;
  const steps = curves.local.length - 1 || 1;
  ctx.strokeStyle = "#999";
  ctx.lineWidth = 1;
  ctx.strokeRect(pad, pad, w, h);
  ctx.fillStyle = "#222";
  ctx.textAlign = "right";
  [0, top / 2, top].forEach((v) => ctx.fillText(v.toFixed(2), pad - 4, pad + h * (1 - v / top) + 4));
  ctx.textAlign = "center";
  ctx.fillText(`update step (0–${steps})`, pad + w / 2, canvas.height - 8);
  for (const [values, color] of series) {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    values.forEach((v, k) => {
      const x = pad + (w * k) / steps, y = pad + h * (1 - v / top);
      k ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    });
    ctx.stroke();
  }
}

await init();
for (const id of ["sel-tau", "sel-eta", "sel-q0", "sel-beta", "sel-draws", "sel-seed"]) {
  $(id).addEventListener("input", drawSelection);
}
for (const id of ["upd-start", "upd-rho", "upd-alpha", "upd-tau0", "upd-best", "upd-steps"]) {
  $(id).addEventListener("input", drawCurves);
}
$("run-go").addEventListener("click", doSearch);
$("run-round").addEventListener("input", drawRound);
drawSelection();
drawCurves();
doSearch();
