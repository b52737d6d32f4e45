import init, { fitCurve, sweep, kernelProfile } from "./pkg/sobolev_fit_web.js";

const SAMPLES = 256;
const plot = document.getElementById("plot");
const side = document.getElementById("side");
const kInput = document.getElementById("k");
const slider = document.getElementById("lambda");
const sliderLabel = document.getElementById("lambda-value");
const status = document.getElementById("status");

const xs = [];
const ys = [];

// Data values live in [-1, 1]; canvas y grows downward.
const toY = (v, h) => h / 2 - v * (h / 2 - 10);
const fromY = (py, h) => (h / 2 - py) / (h / 2 - 10);

function line(ctx, values, color, scaleY) {
  const { width, height } = ctx.canvas;
  ctx.strokeStyle = color;
  ctx.beginPath();
  values.forEach((v, j) => {
    const px = (j / values.length) * width;
    const py = scaleY(v, height);
    j === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
  });
  ctx.stroke();
}

function redraw() {
  const ctx = plot.getContext("2d");
  ctx.clearRect(0, 0, plot.width, plot.height);
  ctx.strokeStyle = "#eee";
  ctx.beginPath();
  ctx.moveTo(0, plot.height / 2);
  ctx.lineTo(plot.width, plot.height / 2);
  ctx.stroke();
  sliderLabel.textContent = `λ = ${Number(10 ** slider.value).toExponential(1)}`;

  if (xs.length > 0) {
    try {
      const curve = fitCurve(Float64Array.from(xs), Float64Array.from(ys), SAMPLES, Number(kInput.value), Number(slider.value));
      line(ctx, curve, "#1f6fb2", toY);
      status.textContent = `${xs.length} points`;
    } catch (e) {
      status.textContent = String(e);
    }
  }
  ctx.fillStyle = "#c0392b";
  xs.forEach((x, i) => {
    ctx.beginPath();
    ctx.arc(x * plot.width, toY(ys[i], plot.height), 4, 0, 2 * Math.PI);
    ctx.fill();
  });
}

function drawSeries(values, color, label) {
  const ctx = side.getContext("2d");
  ctx.clearRect(0, 0, side.width, side.height);
  const max = Math.max(...values);
  const min = Math.min(0, ...values);
  line(ctx, values, color, (v, h) => h - 10 - ((v - min) / (max - min || 1)) * (h - 20));
  ctx.fillStyle = "#333";
  ctx.fillText(label, 8, 14);
}

plot.addEventListener("click", (ev) => {
  const rect = plot.getBoundingClientRect();
  const x = (ev.clientX - rect.left) / rect.width;
  if (x <= 0 || x >= 1) return;
  xs.push(x);
  ys.push(fromY(((ev.clientY - rect.top) / rect.height) * plot.height, plot.height));
  redraw();
});

document.getElementById("auto").addEventListener("click", () => {
  if (xs.length === 0) {
    status.textContent = "add points first";
    return;
  }
  try {
    const lo = Number(slider.min);
    const hi = Number(slider.max);
    const view = sweep(Float64Array.from(xs), Float64Array.from(ys), SAMPLES, Number(kInput.value), lo, hi, 41);
    slider.value = Math.log10(view.lambda0);
    redraw();
    drawSeries(Array.from(view.norms), "#27ae60", `‖f_λ‖ over λ in [1e${lo}, 1e${hi}], peak at λ = ${view.lambda0.toExponential(2)}`);
  } catch (e) {
    status.textContent = String(e);
  }
});

document.getElementById("kernel").addEventListener("click", () => {
  try {
    const g = Array.from(kernelProfile(Number(kInput.value), Number(slider.value), SAMPLES, 256));
    // Center the peak for display.
    const shifted = g.slice(SAMPLES / 2).concat(g.slice(0, SAMPLES / 2));
    drawSeries(shifted, "#8e44ad", "kernel g(x) on [-1/2, 1/2)");
  } catch (e) {
    status.textContent = String(e);
  }
});

document.getElementById("clear").addEventListener("click", () => {
  xs.length = 0;
  ys.length = 0;
  side.getContext("2d").clearRect(0, 0, side.width, side.height);
  redraw();
});

slider.addEventListener("input", redraw);
kInput.addEventListener("change", redraw);

await init();
redraw();
