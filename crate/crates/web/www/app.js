import init, { tokenize, schedule, train_curve } from "./pkg/cmcl_web.js";

const $ = (id) => document.getElementById(id);

function showPieces() {
  const enc = document.querySelector("input[name=enc]:checked").value;
  let view;
  try {
    view = JSON.parse(tokenize($("text").value, enc, Number($("merges").value) || 0));
  } catch (e) {
    $("pieces").textContent = String(e);
    return;
  }
  $("pieces").replaceChildren(...view.tokens.map((t) => {
    const span = document.createElement("span");
    span.className = "tok";
    span.title = t.token;
    for (const p of t.pieces) {
      const b = document.createElement("span");
      b.className = "piece";
      b.textContent = p;
      span.append(b);
    }
    return span;
  }));
  $("count").textContent = `${view.tokens.length} tokens, ${view.n_pieces} subwords`;
}

function showLadder() {
  const v = JSON.parse(schedule(Number($("lr").value) || 0.04, $("disc").checked, $("grad").checked, Number($("sepochs").value) || 1));
  const head = ["group", "lr", ...v.epochs.map((_, i) => `ep ${i + 1}`)];
  const rows = [...v.groups].reverse().map((g) => {
    const cells = v.epochs.map((on) => on.includes(g.group) ? "on" : "off");
    return `<tr><th>${g.group}</th><td>${g.lr.toPrecision(3)}</td>${cells.map((c) => `<td class="${c}">${c === "on" ? "train" : "frozen"}</td>`).join("")}</tr>`;
  });
  $("ladder").innerHTML = `<tr>${head.map((h) => `<th>${h}</th>`).join("")}</tr>${rows.join("")}`;
}

function drawCurve(points) {
  const c = $("curve"), g = c.getContext("2d");
  const pad = 40, w = c.width - 2 * pad, h = c.height - 2 * pad;
  g.clearRect(0, 0, c.width, c.height);
  const sent = points.filter((p) => p.task === "sentiment");
  const n = Math.max(sent.length, 2);
  const maxLoss = Math.max(...sent.map((p) => p.train_loss), 1e-9);
  const x = (i) => pad + (w * i) / (n - 1);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, w, h);
  g.font = "12px sans-serif";
  g.fillStyle = "#444";
  g.fillText("epoch", c.width / 2, c.height - 8);
  g.fillText("1.0", 8, pad + 4);
  g.fillText("0.0", 8, pad + h);
  const line = (vals, color) => {
    g.strokeStyle = color;
    g.beginPath();
    vals.forEach((v, i) => (i ? g.lineTo : g.moveTo).call(g, x(i), pad + h * (1 - v)));
    g.stroke();
  };
  line(sent.map((p) => p.dev_metric), "#2a7");
  line(sent.map((p) => p.train_loss / maxLoss), "#c44");
  g.fillStyle = "#2a7";
  g.fillText("dev accuracy", pad + 8, pad + 16);
  g.fillStyle = "#c44";
  g.fillText(`train loss (max ${maxLoss.toFixed(3)})`, pad + 110, pad + 16);
}

function runTraining() {
  $("status").textContent = "training...";
  setTimeout(() => {
    try {
      const t0 = performance.now();
      const pts = JSON.parse(train_curve($("plan").value, Number($("seed").value) || 0, Number($("epochs").value) || 1));
      drawCurve(pts);
      const last = pts[pts.length - 1];
      const lm = pts.filter((p) => p.task === "lm").length;
      $("status").textContent = `${lm ? lm + " LM epochs, then " : ""}final dev accuracy ${last.dev_metric.toFixed(3)} in ${((performance.now() - t0) / 1000).toFixed(1)}s`;
    } catch (e) {
      $("status").textContent = String(e);
    }
  }, 20);
}

await init();
for (const id of ["text", "merges"]) $(id).addEventListener("input", showPieces);
document.querySelectorAll("input[name=enc]").forEach((r) => r.addEventListener("change", showPieces));
for (const id of ["lr", "disc", "grad", "sepochs"]) $(id).addEventListener("input", showLadder);
$("run").addEventListener("click", runTraining);
showPieces();
showLadder();
