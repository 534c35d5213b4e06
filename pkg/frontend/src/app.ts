/**
 * Browser entry point: wires the API client, session state, viewer, and the
 * control panel (prompt label, brush slider, draw/erase toggle, clear,
 * camera reset, submit, feedback dialog).
 */

import { AnnotationApi, ApiError, ReplayDiff } from "./api.js";
import { AnnotationSession } from "./session.js";
import { MeshViewer } from "./viewer.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

async function main() {
  const annotator =
    new URLSearchParams(location.search).get("annotator") ?? "demo-annotator";
  const api = new AnnotationApi("");
  const spinner = $("spinner");
  const status = $("status");

  // Input is ignored until the template and brush cache have arrived.
  spinner.style.display = "block";
  const template = await api.getTemplate();
  const cache = await api.getBrushCache(template.radii);
  spinner.style.display = "none";

  const session = new AnnotationSession(api, annotator, cache, template.radii);
  const canvas = $("mesh-canvas") as HTMLCanvasElement;
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  const viewer = new MeshViewer(canvas, template);

  const promptLabel = $("prompt-label");
  const slider = $("brush-slider") as HTMLInputElement;
  slider.max = String(template.radii.length - 1);

  function refreshPanel() {
    const prompt = session.currentPrompt;
    if (!session.task) {
      promptLabel.textContent = "No open tasks. Thank you!";
    } else if (prompt === "scene-supported") {
      promptLabel.textContent = "Paint all SCENE-SUPPORTED contact (ground, furniture, ...)";
    } else if (prompt) {
      promptLabel.textContent = `Paint contact with: ${prompt}`;
    } else {
      promptLabel.textContent = "Task complete.";
    }
    $("brush-value").textContent = `${session.currentRadius.toFixed(2)} m`;
    $("mode-draw").classList.toggle("active", session.mode === "draw");
    $("mode-erase").classList.toggle("active", session.mode === "erase");
    status.textContent = `${session.selection.size} vertices selected`;
  }

  viewer.onPaint = (vertex) => {
    if (!session.currentPrompt) return;
    session.paintHover(vertex);
    viewer.setSelection(session.selection);
    refreshPanel();
  };
  viewer.onHover = () => viewer.setSelection(session.selection);

  slider.addEventListener("input", () => {
    session.setRadiusIndex(Number(slider.value));
    refreshPanel();
  });
  $("mode-draw").addEventListener("click", () => {
    session.setMode("draw");
    refreshPanel();
  });
  $("mode-erase").addEventListener("click", () => {
    session.setMode("erase");
    refreshPanel();
  });
  $("clear-selection").addEventListener("click", () => {
    session.clearSelection();
    viewer.setSelection(session.selection);
    refreshPanel();
  });
  $("reset-camera").addEventListener("click", () => viewer.resetCamera());

  $("submit").addEventListener("click", async () => {
    if (!session.task || !session.currentPrompt) return;
    if (session.selection.size === 0) {
      const sure = confirm(
        "Submit EMPTY contact for this prompt? Only do this when there is truly no contact.",
      );
      if (!sure) return;
    }
    try {
      const result = await session.submitPrompt();
      viewer.setSelection(session.selection);
      if (result.ask_feedback) {
        const feedback = prompt("Optional feedback about this image (ambiguities, problems):");
        if (feedback) status.textContent = "Feedback recorded.";
        await session.takeNextTask();
      }
      refreshPanel();
    } catch (err) {
      if (err instanceof ApiError && (err.detail as ReplayDiff)?.server_only !== undefined) {
        const diff = err.detail as ReplayDiff;
        status.textContent =
          `Server replay mismatch: +${diff.server_only.length} / -${diff.client_only.length} ` +
          "vertices. Your selection stays editable.";
      } else {
        status.textContent = `Submission failed: ${err}`;
      }
    }
  });

  await session.takeNextTask();
  viewer.setSelection(session.selection);
  refreshPanel();

  function frame() {
    viewer.render();
    requestAnimationFrame(frame);
  }
  frame();
}

main().catch((err) => {
  document.body.innerHTML = `<pre>Failed to start: ${err}</pre>`;
});
