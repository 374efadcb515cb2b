// Entry point: wires the socket, the controller, the latest-state cell,
// and the three.js viewport together. The render loop reads the newest
// joint state once per display frame; readout numbers always show the
// payload values exactly (only the 3D pose is visually interpolated by
// the display rate itself).

import * as THREE from 'three';
import { OrbitControls } from 'three/examples/jsm/controls/OrbitControls.js';

import { TwinController } from './controller.js';
import { TwinSocket } from './net.js';
import type { JointName, ServerFrame } from './protocol.js';
import { JOINT_ORDER } from './protocol.js';
import { buildScene, type TwinScene } from './scene.js';
import { LatestState } from './state.js';

const el = {
  viewport: document.getElementById('viewport') as HTMLDivElement,
  banner: document.getElementById('banner') as HTMLDivElement,
  stale: document.getElementById('stale') as HTMLDivElement,
  mode: document.getElementById('mode') as HTMLSpanElement,
  face: document.getElementById('face') as HTMLSpanElement,
  sliders: document.getElementById('sliders') as HTMLDivElement,
  errors: document.getElementById('errors') as HTMLDivElement,
};

const controller = new TwinController();
const latest = new LatestState();

let twin: TwinScene | null = null;
let renderer: THREE.WebGLRenderer | null = null;
let orbit: OrbitControls | null = null;
const sliderInputs = new Map<JointName, HTMLInputElement>();
const readouts = new Map<JointName, HTMLSpanElement>();

function showError(text: string): void {
  el.errors.textContent = text;
  el.errors.classList.add('visible');
  setTimeout(() => el.errors.classList.remove('visible'), 4000);
}

function buildViewport(): void {
  if (controller.description === null || renderer !== null) return;
  const width = el.viewport.clientWidth;
  const height = el.viewport.clientHeight;
  twin = buildScene(controller.description, width / height);
  renderer = new THREE.WebGLRenderer({ antialias: true });
  renderer.setSize(width, height);
  renderer.setPixelRatio(window.devicePixelRatio);
  el.viewport.appendChild(renderer.domElement);
  // orbit camera is a pure view: it never touches robot state
  orbit = new OrbitControls(twin.camera, renderer.domElement);
  orbit.target.set(0, 0.22, 0);
  orbit.enableDamping = true;
  window.addEventListener('resize', () => {
    if (renderer === null || twin === null) return;
    const w = el.viewport.clientWidth;
    const h = el.viewport.clientHeight;
    twin.camera.aspect = w / h;
    twin.camera.updateProjectionMatrix();
    renderer.setSize(w, h);
  });
}

function buildSliders(): void {
  el.sliders.innerHTML = '';
  sliderInputs.clear();
  readouts.clear();
  for (const spec of controller.sliderSpecs()) {
    const row = document.createElement('div');
    row.className = 'slider-row';

    const label = document.createElement('label');
    label.textContent = spec.joint;

    const input = document.createElement('input');
    input.type = 'range';
    // bounds come from the hello description, never hardcoded
    input.min = String(spec.min);
    input.max = String(spec.max);
    input.step = '0.001';
    input.value = '0';
    input.disabled = !controller.controlsEnabled;
    input.addEventListener('input', () => {
      const frame = controller.attemptSetJoint(spec.joint,
                                               Number(input.value));
      if (frame !== null) {
        socket.send(frame);
      } else if (controller.mode === 'mirror') {
        showError('read-only: mirror mode');
      }
    });

    const readout = document.createElement('span');
    readout.className = 'readout';
    readout.textContent = '0.000';

    row.append(label, input, readout);
    el.sliders.appendChild(row);
    sliderInputs.set(spec.joint, input);
    readouts.set(spec.joint, readout);
  }
}

function applyMode(): void {
  el.mode.textContent = controller.mode;
  el.mode.className = controller.mode;
  for (const input of sliderInputs.values()) {
    input.disabled = !controller.controlsEnabled;
  }
}

function onFrame(frame: ServerFrame): void {
  switch (frame.kind) {
    case 'hello':
      controller.applyHello(frame);
      buildViewport();
      buildSliders();
      applyMode();
      break;
    case 'mode':
      controller.setMode(frame.mode);
      applyMode();
      break;
    case 'joint_states':
      latest.update(frame, performance.now());
      break;
    case 'face_state':
      el.face.textContent = frame.expression;
      break;
    case 'ack':
      break;
    case 'error':
      showError(frame.reason);
      break;
  }
}

const wsUrl = `ws://${location.host}/twin`;
const socket = new TwinSocket(wsUrl, {
  onFrame,
  onMalformed: () => showError('malformed frame from server'),
  onOpen: () => {
    el.banner.classList.remove('visible');
    latest.reset();
  },
  onDisconnect: () => el.banner.classList.add('visible'),
});
socket.connect();

function renderLoop(): void {
  requestAnimationFrame(renderLoop);
  const now = performance.now();
  el.stale.classList.toggle('visible', latest.isStale(now));
  const state = latest.current();
  if (state !== null && twin !== null) {
    for (const joint of JOINT_ORDER) {
      const angle = state.position[joint];
      if (angle === undefined) continue;
      twin.model.setJointAngle(joint, angle);
      const readout = readouts.get(joint);
      if (readout !== undefined) readout.textContent = angle.toFixed(3);
      const input = sliderInputs.get(joint);
      // mirror mode sliders follow the live state; in control mode the
      // user's handle position is authoritative
      if (input !== undefined && !controller.controlsEnabled) {
        input.value = String(angle);
      }
    }
  }
  orbit?.update();
  if (renderer !== null && twin !== null) {
    renderer.render(twin.scene, twin.camera);
  }
}
renderLoop();
