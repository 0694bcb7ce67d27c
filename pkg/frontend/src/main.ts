/**
 * Browser entry: wires the App to the page chrome — service URL, image
 * upload, the four edit actions, confirm/evaluate buttons.
 */

import { ApiClient } from "./api.js";
import { App } from "./app.js";
import { addNode, modifyEdge, removeNode, replaceNode } from "./delta.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  if (text) node.textContent = text;
  return node;
}

function input(placeholder: string): HTMLInputElement {
  const box = el("input", "field");
  box.placeholder = placeholder;
  return box;
}

async function fileToBase64(file: File): Promise<string> {
  const buffer = await file.arrayBuffer();
  let binary = "";
  for (const byte of new Uint8Array(buffer)) binary += String.fromCharCode(byte);
  return btoa(binary);
}

export function mount(page: HTMLElement) {
  const toolbar = el("div", "toolbar");
  const appRoot = el("div", "app-root");
  page.appendChild(toolbar);
  page.appendChild(appRoot);

  const urlBox = input("service url, e.g. http://localhost:8321");
  urlBox.value = window.location.origin;
  const fileBox = el("input", "field") as HTMLInputElement;
  fileBox.type = "file";
  fileBox.accept = "image/png";
  const openButton = el("button", "action", "open image");
  toolbar.append(urlBox, fileBox, openButton);

  let app: App | null = null;

  openButton.addEventListener("click", async () => {
    const file = fileBox.files?.[0];
    if (!file) return;
    app = new App(appRoot, new ApiClient(urlBox.value));
    await app.createProject(file.name.replace(/\.png$/i, ""), await fileToBase64(file));
  });

  // --- the four edit operations, driven by the current selection ----------

  const actions = el("div", "actions");
  page.appendChild(actions);

  const labelBox = input("label, e.g. blue ball");
  const predicateBox = input("predicate, e.g. on");
  const targetBox = input("relation target node id");
  actions.append(labelBox, predicateBox, targetBox);

  const stage = (build: () => ReturnType<typeof removeNode>[]) => () => {
    if (!app) return;
    app.stageDelta(build());
  };

  const removeButton = el("button", "action", "remove selected");
  removeButton.addEventListener(
    "click",
    stage(() => [removeNode(app!.state.selectedNode ?? "")]),
  );
  const addButton = el("button", "action", "add node");
  addButton.addEventListener(
    "click",
    stage(() => [
      addNode(
        labelBox.value,
        targetBox.value ? [{ p: predicateBox.value || "on", o: targetBox.value }] : [],
      ),
    ]),
  );
  const replaceButton = el("button", "action", "replace selected");
  replaceButton.addEventListener(
    "click",
    stage(() => [replaceNode(app!.state.selectedNode ?? "", labelBox.value)]),
  );
  const modifyButton = el("button", "action", "modify selected edge");
  modifyButton.addEventListener(
    "click",
    stage(() => [modifyEdge(app!.state.selectedEdge!, predicateBox.value)]),
  );

  const previewButton = el("button", "action", "preview plan");
  previewButton.addEventListener("click", () => app?.preview());
  const confirmButton = el("button", "action confirm", "confirm edit");
  confirmButton.addEventListener("click", () => app?.confirm(Date.now() % 100000));
  const evaluateButton = el("button", "action", "evaluate last edit");
  evaluateButton.addEventListener("click", () => {
    const history = app?.state.project?.history ?? [];
    if (history.length > 0) app?.evaluate(history[history.length - 1].edit_id);
  });

  actions.append(removeButton, addButton, replaceButton, modifyButton,
    previewButton, confirmButton, evaluateButton);
}

if (typeof document !== "undefined" && document.getElementById("sgedit-page")) {
  mount(document.getElementById("sgedit-page")!);
}
