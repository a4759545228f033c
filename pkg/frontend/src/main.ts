import { mountEditor } from "./editor";

const params = new URLSearchParams(window.location.search);
const base = params.get("api") ?? "http://127.0.0.1:8000";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app container");

mountEditor(root, base).catch((err) => {
  root.textContent = `Failed to load model from ${base}: ${err}`;
});
