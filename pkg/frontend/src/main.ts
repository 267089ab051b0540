// Wiring: fetch initial views, subscribe to the event stream, route user
// input. All rendered data comes from the gateway; this file only glues.

import { EventFeed, HttpGateway } from './api.js';
import { inspectorText, renderTable, tableModel } from './assetBrowser.js';
import { CommandFlow } from './commandConsole.js';
import { MapScene, renderScene } from './map.js';
import { Viewport, pxToWorld } from './projection.js';
import {
  Store,
  applyCommit,
  applyPose,
  initialState,
  setTrajectory,
  sortAssets,
} from './store.js';
import type { CommitEvent, ContractName } from './types.js';

const gateway = new HttpGateway('');
const store = new Store();
const commandFlow = new CommandFlow(gateway, store);

const el = {
  channel: document.getElementById('channel') as HTMLSelectElement,
  connection: document.getElementById('connection') as HTMLSpanElement,
  canvas: document.getElementById('map') as HTMLCanvasElement,
  contract: document.getElementById('contract') as HTMLSelectElement,
  sort: document.getElementById('sort') as HTMLButtonElement,
  table: document.getElementById('asset-table') as HTMLDivElement,
  inspector: document.getElementById('inspector') as HTMLPreElement,
  robot: document.getElementById('robot') as HTMLSelectElement,
  waypoints: document.getElementById('waypoints') as HTMLUListElement,
  send: document.getElementById('send') as HTMLButtonElement,
  clear: document.getElementById('clear') as HTMLButtonElement,
  commandLog: document.getElementById('command-log') as HTMLUListElement,
  error: document.getElementById('error') as HTMLDivElement,
};

function viewport(): Viewport {
  const world = store.state.world;
  return {
    widthPx: el.canvas.width,
    heightPx: el.canvas.height,
    worldWidth: world?.width ?? 10,
    worldHeight: world?.height ?? 10,
    marginPx: 20,
  };
}

// --- data refresh ------------------------------------------------------------

async function refreshAssets(): Promise<void> {
  const { channel, contractFilter } = store.state;
  const assets = await gateway.assets(channel, contractFilter);
  store.update((s) => ({ ...s, assets }));
}

async function refreshMapData(): Promise<void> {
  const objects = await gateway.objects();
  store.update((s) => ({ ...s, objects }));
  for (const robot of store.state.robots) {
    const points = await gateway.trajectory(robot.robot_id);
    store.update((s) => setTrajectory(s, robot.robot_id, points));
  }
}

async function refreshEverything(): Promise<void> {
  try {
    await refreshAssets();
    await refreshMapData();
    await commandFlow.refreshStatuses(store.state.channel);
    store.update((s) => ({ ...s, lastError: null }));
  } catch (err) {
    store.update((s) => ({ ...s, lastError: String(err) }));
  }
}

function onCommit(event: CommitEvent): void {
  store.update((s) => applyCommit(s, event));
  // a commit changes ledger views; pull the affected ones
  void refreshEverything();
}

// --- rendering -----------------------------------------------------------------

function render(): void {
  const state = store.state;
  el.connection.textContent = state.connection;
  el.connection.className = `badge ${state.connection}`;
  el.error.textContent = state.lastError ?? '';
  el.error.hidden = state.lastError === null;

  renderTable(el.table, tableModel(state.assets, state.contractFilter, state.sortDescending), state.selectedAssetId, (assetId) => {
    store.update((s) => ({ ...s, selectedAssetId: assetId }));
  });
  el.inspector.textContent = inspectorText(
    sortAssets(state.assets, state.sortDescending),
    state.selectedAssetId,
  );

  const ctx = el.canvas.getContext('2d');
  if (ctx) {
    const scene: MapScene = {
      world: state.world,
      trajectories: state.trajectories,
      poses: state.poses,
      objects: state.objects,
      robotIds: state.robots.map((r) => r.robot_id),
      draftWaypoints: commandFlow.draft,
      aerialRobots: new Set(
        state.robots.filter((r) => r.kind === 'aerial').map((r) => r.robot_id),
      ),
    };
    renderScene(ctx, viewport(), scene);
  }

  el.waypoints.textContent = '';
  commandFlow.draft.forEach(([x, y, z], i) => {
    const li = document.createElement('li');
    li.textContent = `${i + 1}: (${x.toFixed(2)}, ${y.toFixed(2)}, ${z.toFixed(1)})`;
    el.waypoints.appendChild(li);
  });
  el.send.disabled = !commandFlow.canSubmit();

  el.commandLog.textContent = '';
  for (const cmd of [...state.commands].reverse()) {
    const li = document.createElement('li');
    const code = cmd.validationCode && cmd.phase === 'failed' ? ` (${cmd.validationCode})` : '';
    li.textContent = `${cmd.assetId} -> ${cmd.robotId}: ${cmd.phase}${code} [tx ${cmd.txId.slice(0, 12)}]`;
    li.className = `phase-${cmd.phase}`;
    el.commandLog.appendChild(li);
  }
}

// --- user input -----------------------------------------------------------------

el.canvas.addEventListener('click', (ev) => {
  const rect = el.canvas.getBoundingClientRect();
  const { x, y } = pxToWorld(viewport(), ev.clientX - rect.left, ev.clientY - rect.top);
  const world = store.state.world;
  if (world && (x < 0 || y < 0 || x > world.width || y > world.height)) {
    return; // clicks outside the room are ignored
  }
  const robot = store.state.robots.find((r) => r.robot_id === el.robot.value);
  commandFlow.selectRobot(el.robot.value);
  commandFlow.addWaypoint(
    Math.round(x * 100) / 100,
    Math.round(y * 100) / 100,
    robot?.kind === 'aerial',
  );
  render();
});

el.send.addEventListener('click', () => {
  void (async () => {
    try {
      await commandFlow.submit();
      store.update((s) => ({ ...s, lastError: null }));
    } catch (err) {
      store.update((s) => ({ ...s, lastError: String(err) }));
    }
  })();
});

el.clear.addEventListener('click', () => {
  commandFlow.clearDraft();
  render();
});

el.contract.addEventListener('change', () => {
  store.update((s) => ({
    ...s,
    contractFilter: el.contract.value as ContractName,
    selectedAssetId: null,
  }));
  void refreshAssets();
});

el.sort.addEventListener('click', () => {
  store.update((s) => ({ ...s, sortDescending: !s.sortDescending }));
});

el.robot.addEventListener('change', () => {
  commandFlow.selectRobot(el.robot.value);
  render();
});

// --- boot ------------------------------------------------------------------------

async function boot(): Promise<void> {
  store.subscribe(render);
  store.update(() => initialState());
  try {
    const [channels, robots, world] = await Promise.all([
      gateway.channels(),
      gateway.robots(),
      gateway.world(),
    ]);
    store.update((s) => ({ ...s, channels, robots, world, channel: channels[0] ?? s.channel }));
    el.channel.textContent = '';
    for (const name of channels) {
      const option = document.createElement('option');
      option.value = name;
      option.textContent = name;
      el.channel.appendChild(option);
    }
    el.robot.textContent = '';
    for (const robot of robots) {
      const option = document.createElement('option');
      option.value = robot.robot_id;
      option.textContent = `${robot.robot_id} (${robot.kind})`;
      el.robot.appendChild(option);
    }
    if (robots.length > 0) {
      commandFlow.selectRobot(robots[0].robot_id);
    }
    await refreshEverything();
  } catch (err) {
    store.update((s) => ({ ...s, lastError: String(err) }));
  }

  const feed = new EventFeed(
    '/api/events',
    {
      onCommit,
      onPose: (pose) => store.update((s) => applyPose(s, pose)),
      onStatus: (status) => store.update((s) => ({ ...s, connection: status })),
    },
    { pollFn: refreshEverything },
  );
  feed.start();
}

void boot();
