import { ConsoleApp } from "./ui.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app mount point");

const app = new ConsoleApp(root);
app.start();

// handy for poking at the live state from devtools
(window as unknown as { rangeforge: ConsoleApp }).rangeforge = app;
