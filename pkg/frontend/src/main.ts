import { ApiClient } from "./api.js";
import { SessionController, type ViewState } from "./controller.js";
import { drawContextTile, drawCrosshair, drawSpectrum, hexToRgb, overlayImage } from "./render.js";

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const sceneCanvas = el<HTMLCanvasElement>("scene");
const tileCanvas = el<HTMLCanvasElement>("tile");
const spectrumCanvas = el<HTMLCanvasElement>("spectrum");
const classButtons = el<HTMLDivElement>("class-buttons");
const progressLabel = el<HTMLSpanElement>("progress");
const progressFill = el<HTMLDivElement>("progress-fill");
const statusLine = el<HTMLParagraphElement>("status");
const queryPanel = el<HTMLDivElement>("query-panel");
const resultPanel = el<HTMLDivElement>("result-panel");
const nmiLine = el<HTMLSpanElement>("nmi");
const overlaySelect = el<HTMLSelectElement>("overlay-mode");
const createForm = el<HTMLFormElement>("create-form");
const setupPanel = el<HTMLDivElement>("setup-panel");
const sessionPanel = el<HTMLDivElement>("session-panel");

let controller: SessionController;
let sceneBitmap: ImageBitmap | null = null;
let sceneSessionId: string | null = null;

const SCENE_SCALE = 8;

async function ensureSceneBitmap(sessionId: string): Promise<ImageBitmap> {
  if (sceneBitmap && sceneSessionId === sessionId) return sceneBitmap;
  const response = await fetch(api.contextImageUrl(sessionId));
  sceneBitmap = await createImageBitmap(await response.blob());
  sceneSessionId = sessionId;
  return sceneBitmap;
}

async function renderScene(state: ViewState): Promise<void> {
  const session = state.session;
  if (!session) return;
  const bitmap = await ensureSceneBitmap(session.id);
  sceneCanvas.width = session.cols * SCENE_SCALE;
  sceneCanvas.height = session.rows * SCENE_SCALE;
  const ctx = sceneCanvas.getContext("2d")!;
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(bitmap, 0, 0, sceneCanvas.width, sceneCanvas.height);

  if (state.segmentation && state.overlay !== "none") {
    const pixels = overlayImage(
      state.segmentation,
      session.palette,
      session.rows,
      session.cols,
      state.overlay,
    );
    const overlay = new OffscreenCanvas(session.cols, session.rows);
    const octx = overlay.getContext("2d")!;
    const image = octx.createImageData(session.cols, session.rows);
    image.data.set(pixels);
    octx.putImageData(image, 0, 0);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(overlay, 0, 0, sceneCanvas.width, sceneCanvas.height);
  }

  if (state.query) {
    drawCrosshair(
      ctx,
      (state.query.col + 0.5) * SCENE_SCALE,
      (state.query.row + 0.5) * SCENE_SCALE,
      SCENE_SCALE,
    );
  }
}

function renderClassButtons(state: ViewState): void {
  const session = state.session;
  if (!session) return;
  classButtons.replaceChildren();
  session.class_names.forEach((name, index) => {
    const button = document.createElement("button");
    const classId = index + 1;
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    const [r, g, b] = hexToRgb(session.palette[index] ?? "#888888");
    swatch.style.backgroundColor = `rgb(${r}, ${g}, ${b})`;
    button.append(swatch, `${classId}. ${name}`);
    button.disabled = state.busy || state.phase !== "labeling";
    button.addEventListener("click", () => void controller.chooseClass(classId));
    classButtons.append(button);
  });
}

async function render(state: ViewState): Promise<void> {
  setupPanel.hidden = state.phase !== "idle" && state.phase !== "error";
  sessionPanel.hidden = state.session === null;
  statusLine.textContent =
    state.phase === "error"
      ? `error: ${state.error}`
      : state.phase === "creating"
        ? "preparing session (building the graph and ranking)..."
        : "";

  const session = state.session;
  if (!session) return;

  const total = session.effective_budget;
  progressLabel.textContent = `${session.cursor} / ${total} labels`;
  progressFill.style.width =
    total > 0 ? `${(100 * session.cursor) / total}%` : "100%";

  queryPanel.hidden = state.phase !== "labeling";
  resultPanel.hidden = state.phase !== "done";

  if (state.query) {
    const tile = state.query.context_tile;
    await drawContextTile(
      tileCanvas,
      tile.png_base64,
      state.query.row - tile.row_offset,
      state.query.col - tile.col_offset,
    );
    drawSpectrum(spectrumCanvas, state.query.spectrum);
    el<HTMLSpanElement>("query-where").textContent =
      `pixel ${state.query.pixel} at (${state.query.row}, ${state.query.col}), ` +
      `rank ${state.query.rank}`;
  }
  if (state.phase === "done" && state.segmentation) {
    nmiLine.textContent =
      state.segmentation.nmi === null
        ? "no ground truth available"
        : `NMI vs ground truth: ${state.segmentation.nmi.toFixed(4)}`;
  }
  renderClassButtons(state);
  await renderScene(state);

  const url = new URL(window.location.href);
  url.searchParams.set("session", session.id);
  window.history.replaceState(null, "", url);
}

function bootstrap(): void {
  controller = new SessionController(api, (state) => void render(state));

  createForm.addEventListener("submit", (event) => {
    event.preventDefault();
    const data = new FormData(createForm);
    const labels = String(data.get("labels") ?? "").trim();
    void controller.create({
      cube: String(data.get("cube")),
      labels: labels || null,
      scope: labels ? "labeled-only" : "all",
      config: {
        neighbors: Number(data.get("neighbors")),
        classes: Number(data.get("classes")),
        sigma0: Number(data.get("sigma0")),
        time: Number(data.get("time")),
        budget: Number(data.get("budget")),
        seed: Number(data.get("seed")),
        purity_runs: Number(data.get("purity_runs")),
      },
    });
  });

  overlaySelect.addEventListener("change", () => {
    controller.setOverlay(
      overlaySelect.value as "none" | "segmentation" | "provenance",
    );
  });

  // Keyboard shortcuts: 1..9 answer the open query.
  window.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement) return;
    const classId = Number(event.key);
    if (Number.isInteger(classId) && classId >= 1 && classId <= 9) {
      void controller.chooseClass(classId);
    }
  });

  const sessionId = new URL(window.location.href).searchParams.get("session");
  if (sessionId) void controller.attach(sessionId);
}

bootstrap();
