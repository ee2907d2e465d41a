import init, { Demo } from "./pkg/dgc_web.js";

const form = document.getElementById("controls");
const status = document.getElementById("status");
const report = document.getElementById("report");

function paint(canvas, width, height, rgba) {
  canvas.width = width;
  canvas.height = height;
  const img = new ImageData(new Uint8ClampedArray(rgba), width, height);
  canvas.getContext("2d").putImageData(img, 0, 0);
}

function value(name) {
  return Number(form.elements[name].value);
}

let demo = null;
let sceneKey = "";

function showReport(r) {
  if (r.error) {
    report.innerHTML = "";
    status.textContent = r.error;
    return;
  }
  status.textContent = r.low_confidence ? "Low confidence: ground ratio below 1.03%." : "";
  const rows = [
    ["Recovered scale", r.scale_factor.toFixed(6)],
    ["True scale γ", r.true_scale.toFixed(6)],
    ["Scale error", (100 * r.scale_error).toFixed(3) + " %"],
    ["Median camera height (relative)", r.estimated_height.toFixed(6)],
    ["Ground ratio", (100 * r.ground_ratio).toFixed(2) + " %"],
    ["Ground samples", r.n_samples],
  ];
  report.innerHTML = rows.map(([k, v]) => `<tr><td>${k}</td><td>${v}</td></tr>`).join("");
}

function update() {
  for (const out of form.querySelectorAll("output")) {
    out.textContent = out.previousElementSibling.value;
  }
  const args = [320, 96, value("pitch"), value("occluder"), value("car"), value("noise"), value("gamma"), value("seed")];
  const key = args.join(",");
  try {
    if (key !== sceneKey) {
      if (demo) demo.free();
      demo = new Demo(...args);
      sceneKey = key;
      paint(document.getElementById("normals"), demo.width(), demo.height(), demo.normalsRgba());
    }
    const smax = value("smax");
    paint(document.getElementById("mask"), demo.width(), demo.height(), demo.groundMaskRgba(smax));
    showReport(JSON.parse(demo.recover(smax)));
  } catch (e) {
    status.textContent = String(e);
  }
}

await init();
form.addEventListener("input", update);
update();
