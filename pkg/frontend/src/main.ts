import { ApiClient, ApiError } from "./api.js";
import { overlayPixels } from "./overlay.js";
import { classColor, cssColor } from "./palette.js";
import { ClientSession } from "./session.js";
import type { FinishResponse, SessionInfo } from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const api = new ApiClient("");
const canvas = $<HTMLCanvasElement>("canvas");
const ctx = canvas.getContext("2d")!;
const banner = $<HTMLDivElement>("banner");
const statusLine = $<HTMLDivElement>("status-line");
const summaryPanel = $<HTMLDivElement>("summary");
const classBar = $<HTMLDivElement>("class-bar");
const lockBadge = $<HTMLSpanElement>("lock");
const zoomSelect = $<HTMLSelectElement>("zoom");
const overlayToggle = $<HTMLInputElement>("overlay-toggle");

let session: ClientSession | null = null;
let imageBitmap: ImageBitmap | null = null;
let overlayLabels: Uint8Array | null = null;
let selectedClass = 1;
let bannerTimer: number | undefined;

function zoom(): number {
  return parseInt(zoomSelect.value, 10);
}

function showBanner(message: string, isError = true): void {
  banner.textContent = message;
  banner.className = isError ? "banner error" : "banner info";
  banner.style.display = "block";
  window.clearTimeout(bannerTimer);
  bannerTimer = window.setTimeout(() => (banner.style.display = "none"), 4000);
}

function setStatus(text: string): void {
  statusLine.textContent = text;
}

function buildClassBar(numClasses: number): void {
  classBar.innerHTML = "";
  for (let c = 0; c < numClasses; c++) {
    const button = document.createElement("button");
    button.textContent = c === 0 ? "background (0)" : `class ${c}`;
    button.style.borderColor = cssColor(c);
    button.dataset.classLabel = String(c);
    if (c === selectedClass) button.classList.add("active");
    button.onclick = () => {
      selectedClass = c;
      for (const other of classBar.children) other.classList.remove("active");
      button.classList.add("active");
    };
    classBar.appendChild(button);
  }
}

function redraw(): void {
  if (!session || !imageBitmap) return;
  const { height, width } = session.info;
  const z = zoom();
  canvas.width = width * z;
  canvas.height = height * z;
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(imageBitmap, 0, 0, canvas.width, canvas.height);
  if (overlayLabels && overlayToggle.checked) {
    const rgba = overlayPixels(overlayLabels, height, width);
    const off = new OffscreenCanvas(width, height);
    const offCtx = off.getContext("2d")!;
    offCtx.putImageData(new ImageData(rgba, width, height), 0, 0);
    ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
  }
  for (const click of session.clickLog) {
    const [r, g, b] = classColor(click.classLabel);
    ctx.fillStyle = `rgb(${r}, ${g}, ${b})`;
    ctx.strokeStyle = "white";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.arc((click.col + 0.5) * z, (click.row + 0.5) * z, Math.max(3, z / 2), 0, 2 * Math.PI);
    ctx.fill();
    ctx.stroke();
  }
}

function sessionEvents() {
  return {
    onOverlay: (update: { labels: Uint8Array; t: number; modelVersion: number; latencyMs: number }) => {
      overlayLabels = update.labels;
      setStatus(
        `t=${update.t}  model v${update.modelVersion}  last click ${update.latencyMs.toFixed(0)} ms`,
      );
      redraw();
    },
    onError: (message: string, code: string) => {
      if (code === "ConcurrentClick") {
        lockBadge.style.display = "inline";
        window.setTimeout(() => (lockBadge.style.display = "none"), 800);
        return;
      }
      showBanner(`${code}: ${message}`);
    },
    onBusy: (busy: boolean) => {
      lockBadge.style.display = busy ? "inline" : "none";
    },
    onFinished: (summary: FinishResponse) => {
      const dice = summary.dice !== undefined ? `  dice ${(summary.dice * 100).toFixed(1)}%` : "";
      summaryPanel.textContent =
        `${summary.updates_applied} update(s) applied, model v${summary.model_version}${dice}`;
      summaryPanel.style.display = "block";
      setStatus("session closed");
    },
  };
}

async function openSession(open: () => Promise<SessionInfo>, bitmap: ImageBitmap): Promise<void> {
  try {
    const info = await open();
    imageBitmap = bitmap;
    overlayLabels = null;
    summaryPanel.style.display = "none";
    session = new ClientSession(api, info, sessionEvents());
    selectedClass = Math.min(1, info.num_classes - 1);
    buildClassBar(info.num_classes);
    setStatus(
      `session ${info.session_id}  ${info.width}x${info.height}  K=${info.num_classes}` +
        `${info.evaluation ? "  (evaluation mode)" : ""}  — place the first click inside the target`,
    );
    redraw();
  } catch (err) {
    const detail = err instanceof ApiError ? err.message : String(err);
    showBanner(`cannot open session: ${detail}`);
  }
}

async function openUpload(file: File): Promise<void> {
  const bytes = new Uint8Array(await file.arrayBuffer());
  let binary = "";
  for (const b of bytes) binary += String.fromCharCode(b);
  const b64 = btoa(binary);
  const bitmap = await createImageBitmap(file);
  await openSession(() => api.createSessionFromUpload(b64), bitmap);
}

async function openDataset(datasetId: string): Promise<void> {
  try {
    const info = await api.createSessionFromDataset(datasetId);
    const resp = await fetch(`/sessions/${info.session_id}/image.png`);
    const bitmap = await createImageBitmap(await resp.blob());
    await openSession(async () => info, bitmap);
  } catch (err) {
    const detail = err instanceof ApiError ? err.message : String(err);
    showBanner(`cannot open dataset image: ${detail}`);
  }
}

function canvasToPixel(event: MouseEvent): [number, number] {
  const rect = canvas.getBoundingClientRect();
  const z = zoom();
  const col = Math.floor((event.clientX - rect.left) / z);
  const row = Math.floor((event.clientY - rect.top) / z);
  return [row, col];
}

function wire(): void {
  $<HTMLInputElement>("file-input").addEventListener("change", (event) => {
    const input = event.target as HTMLInputElement;
    if (input.files && input.files[0]) void openUpload(input.files[0]);
  });

  $<HTMLButtonElement>("open-dataset").onclick = () => {
    const datasetId = $<HTMLInputElement>("dataset-id").value.trim();
    if (datasetId) void openDataset(datasetId);
    else showBanner("enter a dataset image id first");
  };

  canvas.addEventListener("contextmenu", (e) => e.preventDefault());
  canvas.addEventListener("mousedown", (event) => {
    if (!session) return;
    const [row, col] = canvasToPixel(event);
    // two-class ergonomics: left button = foreground, right = background;
    // more classes use the palette selection for the left button
    let label = selectedClass;
    if (event.button === 2) label = 0;
    else if (session.info.num_classes === 2 && event.button === 0) label = 1;
    if (session.placeClick(row, col, label)) redraw();
  });

  $<HTMLButtonElement>("accept").onclick = () => void session?.finish(true);
  $<HTMLButtonElement>("reject").onclick = () => void session?.finish(false);
  zoomSelect.onchange = redraw;
  overlayToggle.onchange = redraw;

  void api
    .status()
    .then((status) => {
      setStatus(
        status.model_loaded
          ? `server ready, model v${status.model_version} (${status.checkpoint_id})`
          : "server has no checkpoint loaded",
      );
    })
    .catch(() => {
      showBanner("server unreachable — start `clickadapt serve` and reload", true);
      setStatus("disconnected");
    });
}

wire();
