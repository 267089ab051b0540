// Asset browser table: contract filter, stamp sorting, raw JSON inspector.

import { sortAssets } from './store.js';
import type { Asset, ContractName } from './types.js';

const COLUMNS: Record<ContractName, string[]> = {
  path: ['asset_id', 'robot_id', 'x', 'y', 'z', 'stamp', 'owner_org'],
  object: ['asset_id', 'label', 'robot_id', 'confidence', 'stamp', 'owner_org'],
  command: ['asset_id', 'robot_id', 'status', 'issued_by', 'stamp', 'owner_org'],
};

export function columnsFor(contract: ContractName): string[] {
  return COLUMNS[contract];
}

export interface TableModel {
  columns: string[];
  rows: { assetId: string; cells: string[] }[];
  emptyMessage: string | null;
}

export function tableModel(
  assets: Asset[],
  contract: ContractName,
  sortDescending: boolean,
): TableModel {
  const columns = columnsFor(contract);
  const rows = sortAssets(assets, sortDescending).map((asset) => ({
    assetId: asset.asset_id,
    cells: columns.map((col) => formatCell((asset as never)[col])),
  }));
  return {
    columns,
    rows,
    emptyMessage: rows.length === 0 ? `no ${contract} assets on this channel yet` : null,
  };
}

function formatCell(value: unknown): string {
  if (typeof value === 'number') {
    return Number.isInteger(value) ? String(value) : value.toFixed(3);
  }
  return String(value);
}

export function renderTable(
  container: HTMLElement,
  model: TableModel,
  selected: string | null,
  onSelect: (assetId: string) => void,
): void {
  container.textContent = '';
  if (model.emptyMessage) {
    const empty = document.createElement('p');
    empty.className = 'empty-state';
    empty.textContent = model.emptyMessage;
    container.appendChild(empty);
    return;
  }
  const table = document.createElement('table');
  const head = table.createTHead().insertRow();
  for (const column of model.columns) {
    const th = document.createElement('th');
    th.textContent = column;
    head.appendChild(th);
  }
  const body = table.createTBody();
  for (const row of model.rows) {
    const tr = body.insertRow();
    tr.dataset.assetId = row.assetId;
    if (row.assetId === selected) {
      tr.className = 'selected';
    }
    tr.addEventListener('click', () => onSelect(row.assetId));
    for (const cell of row.cells) {
      tr.insertCell().textContent = cell;
    }
  }
  container.appendChild(table);
}

export function inspectorText(assets: Asset[], assetId: string | null): string {
  if (assetId === null) {
    return 'click a row to inspect the raw asset JSON';
  }
  const asset = assets.find((a) => a.asset_id === assetId);
  return asset ? JSON.stringify(asset, null, 2) : `asset ${assetId} vanished`;
}
