import init, { classify_json, sample_lift_json, sscm_json } from "./pkg/liftchroma_wasm.js";

const $ = (id) => document.getElementById(id);

function show(out, thunk) {
  try {
    $(out).textContent = JSON.stringify(JSON.parse(thunk()), null, 2);
  } catch (e) {
    $(out).textContent = `error: ${e.message ?? e}`;
  }
}

await init();

$("classify-run").onclick = () =>
  show("classify-out", () => classify_json(Number($("classify-d").value)));

$("sample-run").onclick = () =>
  show("sample-out", () =>
    sample_lift_json($("sample-graph").value, Number($("sample-n").value), BigInt($("sample-seed").value)));

$("sscm-run").onclick = () =>
  show("sscm-out", () => sscm_json($("sscm-graph").value, Number($("sscm-k").value)));
