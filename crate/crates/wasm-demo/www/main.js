import init, { scene, probe, inspect } from "./pkg/ars548_wasm.js";

const $ = (id) => document.getElementById(id);

// Sensor at the left edge, x forward (to the right), y to the left (up).
const VIEW = { xMin: -5, xMax: 100, yMax: 17 };

function toCanvas(canvas, x, y) {
  const sx = canvas.width / (VIEW.xMax - VIEW.xMin);
  return [(x - VIEW.xMin) * sx, canvas.height / 2 - y * sx];
}

function drawScene() {
  const t = parseFloat($("t").value);
  const minSpeed = parseFloat($("speed").value);
  $("t-val").textContent = `${t.toFixed(2)} s`;
  const s = JSON.parse(scene(t, minSpeed));
  const canvas = $("scene");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (s.error) {
    $("scene-info").textContent = s.error;
    return;
  }

  ctx.strokeStyle = "#ddd";
  for (let x = 0; x <= VIEW.xMax; x += 10) {
    const [cx] = toCanvas(canvas, x, 0);
    ctx.beginPath(); ctx.moveTo(cx, 0); ctx.lineTo(cx, canvas.height); ctx.stroke();
  }
  const [ox, oy] = toCanvas(canvas, 0, 0);
  ctx.fillStyle = "#000";
  ctx.fillRect(ox - 4, oy - 4, 8, 8);

  for (const o of s.objects) {
    const [cx, cy] = toCanvas(canvas, o.x, o.y);
    const scale = canvas.width / (VIEW.xMax - VIEW.xMin);
    ctx.save();
    ctx.translate(cx, cy);
    ctx.rotate(-o.yaw);
    ctx.strokeStyle = o.kept ? "#1a7f37" : "#999";
    ctx.fillStyle = o.kept ? "rgba(26,127,55,.25)" : "rgba(0,0,0,0)";
    const w = Math.max(o.length * scale, 3), h = Math.max(o.width * scale, 3);
    ctx.fillRect(-w / 2, -h / 2, w, h);
    ctx.strokeRect(-w / 2, -h / 2, w, h);
    ctx.restore();
    ctx.fillStyle = o.kept ? "#1a7f37" : "#999";
    ctx.fillText(`${o.class} ${o.speed_kmh.toFixed(1)} km/h`, cx + 6, cy - 8);
  }
  for (const d of s.detections) {
    const [cx, cy] = toCanvas(canvas, d.x, d.y);
    ctx.fillStyle = d.doppler < 0 ? "#c33" : "#36c";
    ctx.beginPath(); ctx.arc(cx, cy, 2.5, 0, 2 * Math.PI); ctx.fill();
  }
  const kept = s.objects.filter((o) => o.kept).length;
  $("scene-info").textContent =
    `cycle ${s.cycle}  t=${s.time.toFixed(2)} s  objects ${s.objects.length} (kept ${kept})  detections ${s.detections.length}`;
}

function runProbe() {
  const out = JSON.parse(probe(parseFloat($("az").value), parseFloat($("el").value), parseFloat($("r").value)));
  $("probe-out").textContent =
    `x = ${out.x.toFixed(6)} m\ny = ${out.y.toFixed(6)} m\nz = ${out.z.toFixed(6)} m\n|p| = ${out.norm.toFixed(9)} m`;
}

function runInspect() {
  const out = JSON.parse(inspect($("kind").value, parseInt($("flip").value, 10)));
  if (out.error && !out.result) {
    $("inspect-out").textContent = out.error;
    return;
  }
  const h = out.header;
  $("inspect-out").textContent = [
    `frame length     ${out.length} bytes${out.flipped !== null ? `  (byte ${out.flipped} flipped)` : ""}`,
    h ? `service_id       ${h.service_id}\nmethod_id        ${h.method_id}\npayload_length   ${h.payload_length}\nheader crc16     ${h.crc16}`
      : "header           (unreadable)",
    `computed crc16   ${out.computed_crc16}`,
    `first bytes      ${out.head_hex}`,
    `decode           ${out.result}${out.error ? ` — ${out.error}` : ""}`,
  ].join("\n");
}

await init();
for (const id of ["t", "speed"]) $(id).addEventListener("input", drawScene);
for (const id of ["az", "el", "r"]) $(id).addEventListener("input", runProbe);
for (const id of ["kind", "flip"]) $(id).addEventListener("input", runInspect);
drawScene();
runProbe();
runInspect();
